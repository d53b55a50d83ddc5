#include "memtrain/mnist.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <memory>

#include "memtrain/error.hpp"

namespace memtrain {

namespace {

struct GzCloser {
  void operator()(gzFile f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

/// gzread transparently passes uncompressed files through.
std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.string().c_str(), "rb"));
  if (!f) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> data;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f.get(), buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) throw Error(ErrorKind::truncated_file, path.string() + ": corrupt gzip stream");
    if (n == 0) break;
    data.insert(data.end(), buf.begin(), buf.begin() + n);
  }
  return data;
}

std::uint32_t be32(const std::vector<std::uint8_t>& d, std::size_t off) {
  return (std::uint32_t{d[off]} << 24) | (std::uint32_t{d[off + 1]} << 16) | (std::uint32_t{d[off + 2]} << 8) |
         std::uint32_t{d[off + 3]};
}

void check_magic(const std::vector<std::uint8_t>& d, std::uint32_t want, const std::filesystem::path& path) {
  if (d.size() < 8) throw Error(ErrorKind::truncated_file, path.string() + ": header too short");
  const std::uint32_t magic = be32(d, 0);
  if (magic != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": magic 0x%08x, expected 0x%08x", magic, want);
    throw Error(ErrorKind::bad_magic, path.string() + buf);
  }
}

std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& name : {stem, stem + ".gz"}) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) return p;
  }
  throw Error(ErrorKind::io_error, "missing " + (dir / stem).string() + "[.gz]");
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_gz(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  // Level 9, no name/timestamp in the header: output is byte-stable.
  GzHandle f(gzopen(path.string().c_str(), "wb9"));
  if (!f) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  if (gzwrite(f.get(), bytes.data(), static_cast<unsigned>(bytes.size())) != static_cast<int>(bytes.size())) {
    throw Error(ErrorKind::io_error, "write failed for " + path.string());
  }
}

}  // namespace

Dataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);
  check_magic(img, kIdxImageMagic, images);
  check_magic(lab, kIdxLabelMagic, labels);
  if (img.size() < 16) throw Error(ErrorKind::truncated_file, images.string() + ": header too short");

  const std::size_t n_img = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t n_lab = be32(lab, 4);
  if (img.size() < 16 + n_img * rows * cols) {
    throw Error(ErrorKind::truncated_file, images.string() + ": expected " + std::to_string(n_img) + " images, file has " +
                                               std::to_string((img.size() - 16) / std::max<std::size_t>(1, rows * cols)));
  }
  if (lab.size() < 8 + n_lab) throw Error(ErrorKind::truncated_file, labels.string() + ": fewer labels than declared");
  if (n_img != n_lab) {
    throw Error(ErrorKind::count_mismatch,
                std::to_string(n_img) + " images vs " + std::to_string(n_lab) + " labels");
  }

  Dataset d;
  d.image_rows = rows;
  d.image_cols = cols;
  d.images.resize(n_img * rows * cols);
  for (std::size_t i = 0; i < d.images.size(); ++i) d.images[i] = static_cast<float>(img[16 + i]) / 255.0f;
  d.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(n_lab));
  for (auto l : d.labels) {
    if (l > 9) throw Error(ErrorKind::data_error, labels.string() + ": label out of range");
  }
  return d;
}

MnistSplit load_mnist(const std::filesystem::path& train_images, const std::filesystem::path& train_labels,
                      const std::filesystem::path& test_images, const std::filesystem::path& test_labels) {
  return MnistSplit{load_idx_pair(train_images, train_labels), load_idx_pair(test_images, test_labels)};
}

MnistSplit load_mnist_dir(const std::filesystem::path& dir) {
  return load_mnist(find_file(dir, "train-images-idx3-ubyte"), find_file(dir, "train-labels-idx1-ubyte"),
                    find_file(dir, "t10k-images-idx3-ubyte"), find_file(dir, "t10k-labels-idx1-ubyte"));
}

std::optional<std::filesystem::path> data_dir_from_env() {
  const char* v = std::getenv("MEMTRAIN_DATA_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::filesystem::path(v);
}

Dataset head(const Dataset& d, std::size_t n) {
  n = std::min(n, d.size());
  Dataset out;
  out.image_rows = d.image_rows;
  out.image_cols = d.image_cols;
  out.images.assign(d.images.begin(), d.images.begin() + static_cast<std::ptrdiff_t>(n * d.features()));
  out.labels.assign(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

void write_idx_pair(const Dataset& d, const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::vector<std::uint8_t> img;
  put_be32(img, kIdxImageMagic);
  put_be32(img, static_cast<std::uint32_t>(d.size()));
  put_be32(img, static_cast<std::uint32_t>(d.image_rows));
  put_be32(img, static_cast<std::uint32_t>(d.image_cols));
  for (float p : d.images) img.push_back(static_cast<std::uint8_t>(std::lround(p * 255.0f)));
  std::vector<std::uint8_t> lab;
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(d.size()));
  lab.insert(lab.end(), d.labels.begin(), d.labels.end());
  write_gz(images, img);
  write_gz(labels, lab);
}

}  // namespace memtrain
