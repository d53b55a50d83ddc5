#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace memtrain {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct Dataset {
  std::size_t image_rows = 28;
  std::size_t image_cols = 28;
  std::vector<float> images;  // size() * features(), pixels scaled to [0, 1]
  std::vector<std::uint8_t> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t features() const noexcept { return image_rows * image_cols; }
  [[nodiscard]] std::span<const float> image(std::size_t i) const noexcept {
    return {images.data() + i * features(), features()};
  }
};

struct MnistSplit {
  Dataset train;
  Dataset test;
};

/// Reads an IDX image/label pair, gzip-compressed or raw. Errors: BadMagic,
/// TruncatedFile, CountMismatch, IoError; DataError for labels outside 0..9.
Dataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels);

MnistSplit load_mnist(const std::filesystem::path& train_images, const std::filesystem::path& train_labels,
                      const std::filesystem::path& test_images, const std::filesystem::path& test_labels);

/// Loads the four standard file names from a directory, with or without ".gz".
MnistSplit load_mnist_dir(const std::filesystem::path& dir);

/// MEMTRAIN_DATA_DIR, when set.
std::optional<std::filesystem::path> data_dir_from_env();

/// First n samples.
Dataset head(const Dataset& d, std::size_t n);

/// Writes a gzip-compressed IDX pair (pixels re-quantized to bytes).
void write_idx_pair(const Dataset& d, const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace memtrain
