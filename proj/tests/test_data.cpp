// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "aca/dataset.hpp"
#include "aca/errors.hpp"

using namespace aca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<unsigned char> bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t load_error_offset(std::span<const unsigned char> images, std::span<const unsigned char> labels) {
    try {
        parse_raw(images, labels);
    } catch (const LoadError& e) {
        return e.offset();
    }
    return static_cast<std::size_t>(-1);
}

} // namespace

TEST_CASE("synthetic generator: determinism, balance, range") {
    SyntheticOptions o;
    o.samples = 300;
    const Dataset a = generate_synthetic(7, o), b = generate_synthetic(7, o);
    CHECK(a == b);
    CHECK_FALSE(generate_synthetic(8, o) == a);
    CHECK(a.size() == 300);
    CHECK(a.pixels.size() == 300 * a.image_size());
    CHECK(a.class_counts() == std::vector<std::size_t>{100, 100, 100});
    for (int l : a.labels) CHECK((l >= 0 && l < a.classes));
    for (std::size_t i = 0; i < 4; ++i) {
        const Real v = a.pixel(i, 0, 3, 5);
        CHECK((v >= 0 && v <= 1));
    }
    o.samples = 301;
    const auto counts = generate_synthetic(1, o).class_counts();
    CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);

    for (int size : {4, 10, 7}) {
        SyntheticOptions bad;
        bad.size = size;
        CHECK_THROWS_AS(generate_synthetic(1, bad), ConfigError);
    }
    SyntheticOptions one_class;
    one_class.classes = 1;
    CHECK_THROWS_AS(generate_synthetic(1, one_class), ConfigError);
}

TEST_CASE("noise-free two-class data is separable by the nearest centroid") {
    SyntheticOptions o;
    o.samples = 200;
    o.classes = 2;
    o.noise = 0;
    const Dataset d = generate_synthetic(3, o);
    const std::size_t dim = d.image_size();
    std::vector<std::vector<double>> centroid(2, std::vector<double>(dim, 0.0));
    const auto counts = d.class_counts();
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t p = 0; p < dim; ++p)
            centroid[static_cast<std::size_t>(d.labels[i])][p] += d.pixels[i * dim + p] / double(counts[d.labels[i]]);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double dist[2] = {0, 0};
        for (int c = 0; c < 2; ++c)
            for (std::size_t p = 0; p < dim; ++p) {
                const double diff = d.pixels[i * dim + p] - centroid[static_cast<std::size_t>(c)][p];
                dist[c] += diff * diff;
            }
        if ((dist[1] < dist[0] ? 1 : 0) == d.labels[i]) ++correct;
    }
    CHECK(correct == d.size());
}

TEST_CASE("raw format: round trip, hand-built fixture, validation offsets") {
    TempDir tmp("aca_raw_test");
    SyntheticOptions o;
    o.samples = 30;
    const Dataset d = generate_synthetic(2, o);
    write_raw(d, tmp.path / "img.bin", tmp.path / "lab.bin");
    CHECK(load_raw(tmp.path / "img.bin", tmp.path / "lab.bin") == d);

    // Two 8x8 grayscale samples written byte by byte.
    std::vector<unsigned char> img{'A', 'C', 'A', 'I', 2, 0, 0, 0, 1, 0, 0, 0, 8, 0, 0, 0, 8, 0, 0, 0};
    for (int i = 0; i < 128; ++i) img.push_back(static_cast<unsigned char>(i * 2));
    const std::vector<unsigned char> lab{'A', 'C', 'A', 'L', 2, 0, 0, 0, 1, 0};
    const Dataset hand = parse_raw(img, lab);
    CHECK(hand.size() == 2);
    CHECK(hand.channels == 1);
    CHECK(hand.height == 8);
    CHECK(hand.labels == std::vector<int>{1, 0});
    CHECK(hand.classes == 2);
    CHECK(hand.pixel(1, 0, 7, 7) == doctest::Approx(254.0 / 255));
    CHECK(hand.pixel(0, 0, 0, 3) == doctest::Approx(6.0 / 255));

    const auto labels = bytes_of(tmp.path / "lab.bin");
    const auto images = bytes_of(tmp.path / "img.bin");
    const std::span<const unsigned char> truncated(labels.data(), labels.size() - 5);
    CHECK(load_error_offset(images, truncated) == labels.size() - 5);
    CHECK(load_error_offset(std::span(images.data(), images.size() - 1), labels) == images.size() - 1);
    auto bad_magic = images;
    bad_magic[3] = 'X';
    CHECK(load_error_offset(bad_magic, labels) == 0);
    auto bad_count = labels;
    bad_count[4] ^= 1;
    CHECK(load_error_offset(images, bad_count) == 4);
    auto trailing = labels;
    trailing.push_back(0);
    CHECK(load_error_offset(images, trailing) == labels.size());
    CHECK_THROWS_AS(load_raw(tmp.path / "missing.bin", tmp.path / "lab.bin"), IoError);
}

TEST_CASE("stratified split") {
    SyntheticOptions o;
    o.samples = 100;
    o.classes = 2;
    const Dataset d = generate_synthetic(4, o);
    const auto [a, b] = split(d, 0.5, 11);
    CHECK(a.class_counts() == std::vector<std::size_t>{25, 25});
    CHECK(b.class_counts() == std::vector<std::size_t>{25, 25});

    auto images_of = [](const Dataset& x) {
        std::vector<std::vector<std::uint8_t>> out;
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto first = x.pixels.begin() + static_cast<std::ptrdiff_t>(i * x.image_size());
            std::vector<std::uint8_t> row(first, first + static_cast<std::ptrdiff_t>(x.image_size()));
            row.push_back(static_cast<std::uint8_t>(x.labels[i]));
            out.push_back(std::move(row));
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    auto joined = images_of(a);
    const auto rest = images_of(b);
    joined.insert(joined.end(), rest.begin(), rest.end());
    std::sort(joined.begin(), joined.end());
    CHECK(joined == images_of(d));

    o.samples = 1000;
    const Dataset big = generate_synthetic(4, o);
    const auto s1 = split(big, 0.3, 5), s2 = split(big, 0.3, 5), s3 = split(big, 0.3, 6);
    CHECK(s1.first == s2.first);
    CHECK(s1.second == s2.second);
    CHECK_FALSE(s1.first == s3.first);

    CHECK_THROWS_AS(split(d, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split(d, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(split(d, 0.001, 1), ConfigError);
}

TEST_CASE("normalizer standardizes per channel") {
    SyntheticOptions o;
    o.samples = 60;
    const Dataset d = generate_synthetic(9, o);
    const Normalizer n = Normalizer::fit(d);
    const Tensor t = n.apply(d);
    CHECK(t.shape() == Shape{60, 3, 16, 16});
    for (int c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        const double count = 60.0 * 256;
        for (int i = 0; i < 60; ++i)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) m += t.at(i, c, y, x);
        m /= count;
        for (int i = 0; i < 60; ++i)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) v += (t.at(i, c, y, x) - m) * (t.at(i, c, y, x) - m);
        CHECK(std::abs(m) < 1e-5);
        CHECK(std::abs(v / count - 1) < 1e-4);
    }
    const TensorSet set(d, n);
    const std::size_t idx[] = {5, 2};
    const Tensor batch = set.gather(idx);
    CHECK(batch.at(1, 2, 3, 4) == t.at(2, 2, 3, 4));
    CHECK(set.gather_labels(idx) == std::vector<int>{d.labels[5], d.labels[2]});
}
