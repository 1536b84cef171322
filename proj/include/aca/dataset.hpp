// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "aca/tensor.hpp"

namespace aca {

/// Labelled images with 8-bit pixels, stored (count, channels, h, w).
struct Dataset {
    int channels = 0;
    int height = 0;
    int width = 0;
    int classes = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t image_size() const noexcept {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    /// Pixel scaled to [0, 1].
    Real pixel(std::size_t sample, int c, int y, int x) const {
        return static_cast<Real>(pixels[sample * image_size() + (static_cast<std::size_t>(c) * height + y) * width + x]) /
               Real(255);
    }
    Dataset subset(std::span<const std::size_t> indices) const;
    std::vector<std::size_t> class_counts() const;

    bool operator==(const Dataset&) const = default;
};

struct SyntheticOptions {
    int samples = 600;
    int classes = 3;
    int size = 16;
    int channels = 3;
    /// Scales phase, angle and amplitude jitter and additive pixel noise; 0 makes
    /// every image of a class identical.
    double noise = 0.5;
};

/// Oriented sinusoidal stripes: class c has angle pi*c/classes and frequency
/// 2 + (c mod 4) cycles per image. Sample i has label i mod classes.
Dataset generate_synthetic(std::uint64_t seed, const SyntheticOptions& options);

/// Raw format, little-endian:
///   images: "ACAI" | u32 count | u32 channels | u32 h | u32 w | u8 pixels
///   labels: "ACAL" | u32 count | u8 labels
void write_raw(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset load_raw(const std::filesystem::path& images, const std::filesystem::path& labels);
/// Parses in-memory file contents; LoadError offsets refer to the labels file
/// when the failure is in the labels.
Dataset parse_raw(std::span<const unsigned char> images, std::span<const unsigned char> labels);

/// Stratified seeded split: part a receives round(fraction * n_c) samples of
/// every class c, part b the rest. Each part is returned in shuffled order.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed);

/// Per-channel standardization fitted on one dataset and applied to others.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Normalizer fit(const Dataset& data);
    /// All samples as a float tensor (count, c, h, w).
    Tensor apply(const Dataset& data) const;
};

/// Normalized images held in memory for batching.
struct TensorSet {
    Tensor images;
    std::vector<int> labels;
    int classes = 0;

    TensorSet() = default;
    TensorSet(const Dataset& data, const Normalizer& norm);

    std::size_t size() const noexcept { return labels.size(); }
    /// Samples `indices` as a batch tensor.
    Tensor gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

} // namespace aca
