#include "snnadv/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "snnadv/random.hpp"

namespace snnadv {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw DimensionError("empty subset");
  std::size_t w = images.row_width();
  std::vector<float> data;
  data.reserve(indices.size() * w);
  std::vector<int> lab;
  lab.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw IndexError("subset index " + std::to_string(i) + " out of range");
    auto r = images.row(i);
    data.insert(data.end(), r.begin(), r.end());
    lab.push_back(labels[i]);
  }
  return {Tensor({indices.size(), w}, std::move(data)), std::move(lab), sample_shape, num_classes};
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) {
    throw IndexError("bad slice [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return subset(idx);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int l : labels) counts.at(static_cast<std::size_t>(l))++;
  return counts;
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off, const char* what) {
  if (b.size() < off + 4) throw FormatError(std::string(what) + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace

Dataset parse_mnist_idx(const std::vector<std::uint8_t>& img, const std::vector<std::uint8_t>& lab) {
  std::uint32_t magic = be32(img, 0, "images");
  if (magic != 0x00000803) {
    throw FormatError("images: bad magic " + hex(magic) + ", expected 0x00000803");
  }
  std::uint32_t lmagic = be32(lab, 0, "labels");
  if (lmagic != 0x00000801) {
    throw FormatError("labels: bad magic " + hex(lmagic) + ", expected 0x00000801");
  }
  std::size_t count = be32(img, 4, "images");
  std::size_t rows = be32(img, 8, "images");
  std::size_t cols = be32(img, 12, "images");
  std::size_t lcount = be32(lab, 4, "labels");
  if (count != lcount) {
    throw FormatError("image count " + std::to_string(count) + " != label count " +
                      std::to_string(lcount));
  }
  if (count == 0 || rows == 0 || cols == 0) throw FormatError("images: zero extent");
  std::size_t pixels = rows * cols;
  if (img.size() != 16 + count * pixels) {
    throw FormatError("images: expected " + std::to_string(16 + count * pixels) + " bytes, found " +
                      std::to_string(img.size()));
  }
  if (lab.size() != 8 + count) {
    throw FormatError("labels: expected " + std::to_string(8 + count) + " bytes, found " +
                      std::to_string(lab.size()));
  }
  std::vector<float> data(count * pixels);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(img[16 + i]) / 255.0f;
  std::vector<int> labels(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = lab[8 + i];
    max_label = std::max(max_label, labels[i]);
  }
  std::size_t classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  return {Tensor({count, pixels}, std::move(data)), std::move(labels), {1, rows, cols}, classes};
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  return parse_mnist_idx(read_file(images_path), read_file(labels_path));
}

Dataset synth_blobs(std::size_t n, std::size_t classes, std::size_t dim, std::uint64_t seed,
                    double spread) {
  if (n == 0 || classes == 0 || dim == 0) throw ConfigError("synth_blobs: zero size");
  Rng rng(seed);
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& v : c) v = uniform(rng, 0.2, 0.8);
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  shuffle(labels.begin(), labels.end(), rng);
  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = centers[static_cast<std::size_t>(labels[i])];
    for (std::size_t d = 0; d < dim; ++d) {
      double v = c[d] + spread * standard_normal(rng);
      data[i * dim + d] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return {Tensor({n, dim}, std::move(data)), std::move(labels), {dim}, classes};
}

Split split_dataset(const Dataset& data, std::size_t train_count) {
  if (train_count == 0 || train_count >= data.size()) {
    throw ConfigError("split: train count must be in (0, " + std::to_string(data.size()) + ")");
  }
  return {data.slice(0, train_count), data.slice(train_count, data.size())};
}

}  // namespace snnadv
