// SPDX-License-Identifier: Apache-2.0
#include "aca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "aca/little_endian.hpp"
#include "aca/rng.hpp"

namespace aca {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.classes = classes;
    const std::size_t n = image_size();
    out.pixels.reserve(indices.size() * n);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw ConfigError("dataset index " + std::to_string(i) + " out of range");
        out.pixels.insert(out.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * n),
                          pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
        out.labels.push_back(labels[i]);
    }
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(classes, 0)), 0);
    for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
    return counts;
}

Dataset generate_synthetic(std::uint64_t seed, const SyntheticOptions& o) {
    if (o.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (o.size < 8 || o.size % 4 != 0) throw ConfigError("synthetic image size must be >= 8 and divisible by 4");
    if (o.samples < 1) throw ConfigError("synthetic data needs at least one sample");
    if (o.channels < 1) throw ConfigError("synthetic data needs at least one channel");
    if (!(o.noise >= 0.0)) throw ConfigError("synthetic noise must be non-negative");

    Dataset d;
    d.channels = o.channels;
    d.height = d.width = o.size;
    d.classes = o.classes;
    d.pixels.resize(static_cast<std::size_t>(o.samples) * d.image_size());
    d.labels.resize(static_cast<std::size_t>(o.samples));

    Rng rng(seed);
    const double two_pi = 2.0 * std::numbers::pi;
    const double phase_scale = std::min(1.0, 2.0 * o.noise);
    std::vector<double> gains(static_cast<std::size_t>(o.channels));
    for (int i = 0; i < o.samples; ++i) {
        const int c = i % o.classes;
        d.labels[static_cast<std::size_t>(i)] = c;
        const double angle = std::numbers::pi * c / o.classes + 0.1 * o.noise * rng.normal();
        const double freq = 2.0 + (c % 4);
        const double phase = two_pi * phase_scale * rng.uniform();
        const double amp = 0.35 * (1.0 - 0.5 * std::min(1.0, o.noise) * rng.uniform());
        for (auto& g : gains) g = 1.0 + 0.2 * o.noise * rng.normal();
        const double kx = two_pi * freq * std::cos(angle) / o.size;
        const double ky = two_pi * freq * std::sin(angle) / o.size;
        std::uint8_t* img = d.pixels.data() + static_cast<std::size_t>(i) * d.image_size();
        for (int ch = 0; ch < o.channels; ++ch)
            for (int y = 0; y < o.size; ++y)
                for (int x = 0; x < o.size; ++x) {
                    double v = 0.5 + amp * gains[static_cast<std::size_t>(ch)] * std::sin(kx * x + ky * y + phase);
                    if (o.noise > 0.0) v += 0.2 * o.noise * rng.normal();
                    v = std::clamp(v, 0.0, 1.0);
                    img[(static_cast<std::size_t>(ch) * o.size + y) * o.size + x] =
                        static_cast<std::uint8_t>(std::lround(255.0 * v));
                }
    }
    return d;
}

void write_raw(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
    ByteWriter wi;
    wi.bytes("ACAI", 4);
    wi.u32(static_cast<std::uint32_t>(data.size()));
    wi.u32(static_cast<std::uint32_t>(data.channels));
    wi.u32(static_cast<std::uint32_t>(data.height));
    wi.u32(static_cast<std::uint32_t>(data.width));
    wi.bytes(data.pixels.data(), data.pixels.size());
    ByteWriter wl;
    wl.bytes("ACAL", 4);
    wl.u32(static_cast<std::uint32_t>(data.size()));
    for (int l : data.labels) {
        if (l < 0 || l > 255) throw ConfigError("label " + std::to_string(l) + " does not fit in one byte");
        wl.u8(static_cast<std::uint8_t>(l));
    }
    write_file(images, wi.buffer());
    write_file(labels, wl.buffer());
}

Dataset parse_raw(std::span<const unsigned char> images, std::span<const unsigned char> labels) {
    Dataset d;
    ByteReader ri(images);
    if (ri.string(4) != "ACAI") throw LoadError(0, "bad images magic");
    const std::uint32_t count = ri.u32();
    d.channels = static_cast<int>(ri.u32());
    d.height = static_cast<int>(ri.u32());
    d.width = static_cast<int>(ri.u32());
    if (d.channels < 1 || d.height < 1 || d.width < 1) throw LoadError(8, "zero image dimension");
    const std::size_t bytes = static_cast<std::size_t>(count) * d.image_size();
    if (ri.remaining() < bytes)
        throw LoadError(images.size(), "images file truncated: expected " + std::to_string(20 + bytes) + " bytes");
    if (ri.remaining() > bytes) throw LoadError(20 + bytes, "trailing bytes in images file");
    d.pixels.assign(images.begin() + 20, images.end());

    ByteReader rl(labels);
    if (rl.string(4) != "ACAL") throw LoadError(0, "bad labels magic");
    const std::uint32_t lcount = rl.u32();
    if (lcount != count)
        throw LoadError(4, "labels count " + std::to_string(lcount) + " does not match images count " +
                               std::to_string(count));
    d.labels.reserve(count);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const int l = rl.u8();
        max_label = std::max(max_label, l);
        d.labels.push_back(l);
    }
    if (!rl.done()) throw LoadError(rl.offset(), "trailing bytes in labels file");
    d.classes = std::max(2, max_label + 1);
    return d;
}

Dataset load_raw(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    return parse_raw(ib, lb);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.classes));
    for (std::size_t i = 0; i < data.size(); ++i) by_class.at(static_cast<std::size_t>(data.labels[i])).push_back(i);
    std::vector<std::size_t> a, b;
    for (auto& members : by_class) {
        rng.shuffle(members.begin(), members.end());
        const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        a.insert(a.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        b.insert(b.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    if (a.empty() || b.empty()) throw ConfigError("split fraction leaves one part empty");
    rng.shuffle(a.begin(), a.end());
    rng.shuffle(b.begin(), b.end());
    return {data.subset(a), data.subset(b)};
}

Normalizer Normalizer::fit(const Dataset& data) {
    if (data.size() == 0) throw ConfigError("cannot fit normalization on an empty dataset");
    Normalizer n;
    const std::size_t plane = static_cast<std::size_t>(data.height) * data.width;
    for (int c = 0; c < data.channels; ++c) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::uint8_t* p = data.pixels.data() + i * data.image_size() + static_cast<std::size_t>(c) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const double v = p[k] / 255.0;
                s += v;
                s2 += v * v;
            }
        }
        const double count = static_cast<double>(plane * data.size());
        const double mean = s / count;
        const double var = std::max(0.0, s2 / count - mean * mean);
        n.mean.push_back(mean);
        n.stddev.push_back(std::max(std::sqrt(var), 1e-6));
    }
    return n;
}

Tensor Normalizer::apply(const Dataset& data) const {
    if (static_cast<int>(mean.size()) != data.channels)
        throw ConfigError("normalizer has " + std::to_string(mean.size()) + " channels, dataset has " +
                          std::to_string(data.channels));
    Tensor t({static_cast<int>(data.size()), data.channels, data.height, data.width});
    const std::size_t plane = static_cast<std::size_t>(data.height) * data.width;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (int c = 0; c < data.channels; ++c) {
            const std::size_t base = i * data.image_size() + static_cast<std::size_t>(c) * plane;
            const double m = mean[static_cast<std::size_t>(c)];
            const double s = stddev[static_cast<std::size_t>(c)];
            for (std::size_t k = 0; k < plane; ++k)
                t[base + k] = static_cast<Real>((data.pixels[base + k] / 255.0 - m) / s);
        }
    return t;
}

TensorSet::TensorSet(const Dataset& data, const Normalizer& norm)
    : images(norm.apply(data)), labels(data.labels), classes(data.classes) {}

Tensor TensorSet::gather(std::span<const std::size_t> indices) const {
    const Shape s = images.shape();
    Tensor out({static_cast<int>(indices.size()), s.c, s.h, s.w});
    const std::size_t n = static_cast<std::size_t>(s.c) * s.plane();
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::memcpy(out.ptr() + i * n, images.ptr() + indices[i] * n, n * sizeof(Real));
    return out;
}

std::vector<int> TensorSet::gather_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels.at(i));
    return out;
}

} // namespace aca
