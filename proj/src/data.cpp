#include "bilinear/data.hpp"

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "bilinear/errors.hpp"
#include "bilinear/rng.hpp"

namespace bilinear {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  return (static_cast<std::uint32_t>(bytes[at]) << 24) |
         (static_cast<std::uint32_t>(bytes[at + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[at + 3]);
}

void write_u32_be(std::vector<std::uint8_t>& bytes, std::uint32_t v) {
  bytes.push_back(static_cast<std::uint8_t>(v >> 24));
  bytes.push_back(static_cast<std::uint8_t>(v >> 16));
  bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  bytes.push_back(static_cast<std::uint8_t>(v));
}

void check_length(const char* who, std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    throw DataError(std::string(who) + ": expected " + std::to_string(expected) +
                    " bytes but got " + std::to_string(actual));
  }
}

}  // namespace

std::vector<ByteImage> parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) {
    throw DataError("parse_idx_images: header needs 16 bytes, got " +
                    std::to_string(bytes.size()));
  }
  const std::uint32_t magic = read_u32_be(bytes, 0);
  if (magic != kImagesMagic) {
    throw DataError("parse_idx_images: bad magic " + std::to_string(magic));
  }
  const std::uint64_t count = read_u32_be(bytes, 4);
  const std::uint32_t rows = read_u32_be(bytes, 8);
  const std::uint32_t cols = read_u32_be(bytes, 12);
  if (count > 0 && (rows == 0 || cols == 0)) {
    throw DataError("parse_idx_images: images declared " + std::to_string(rows) +
                    "x" + std::to_string(cols));
  }
  check_length("parse_idx_images", 16 + count * rows * cols, bytes.size());
  std::vector<ByteImage> images;
  images.reserve(count);
  std::size_t at = 16;
  for (std::uint64_t n = 0; n < count; ++n) {
    ByteImage img;
    img.rows = static_cast<int>(rows);
    img.cols = static_cast<int>(cols);
    img.pixels.assign(bytes.begin() + at, bytes.begin() + at + rows * cols);
    at += rows * cols;
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) {
    throw DataError("parse_idx_labels: header needs 8 bytes, got " +
                    std::to_string(bytes.size()));
  }
  const std::uint32_t magic = read_u32_be(bytes, 0);
  if (magic != kLabelsMagic) {
    throw DataError("parse_idx_labels: bad magic " + std::to_string(magic));
  }
  const std::uint64_t count = read_u32_be(bytes, 4);
  check_length("parse_idx_labels", 8 + count, bytes.size());
  std::vector<int> labels;
  labels.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    const int label = bytes[8 + n];
    if (label > 9) {
      throw DataError("parse_idx_labels: label " + std::to_string(label) +
                      " at index " + std::to_string(n) + " is not a digit");
    }
    labels.push_back(label);
  }
  return labels;
}

std::vector<std::uint8_t> write_idx_images(const std::vector<ByteImage>& images) {
  const int rows = images.empty() ? 0 : images.front().rows;
  const int cols = images.empty() ? 0 : images.front().cols;
  std::vector<std::uint8_t> bytes;
  write_u32_be(bytes, kImagesMagic);
  write_u32_be(bytes, static_cast<std::uint32_t>(images.size()));
  write_u32_be(bytes, static_cast<std::uint32_t>(rows));
  write_u32_be(bytes, static_cast<std::uint32_t>(cols));
  for (const ByteImage& img : images) {
    if (img.rows != rows || img.cols != cols ||
        img.pixels.size() != static_cast<std::size_t>(rows) * cols) {
      throw std::invalid_argument("write_idx_images: images disagree on shape");
    }
    bytes.insert(bytes.end(), img.pixels.begin(), img.pixels.end());
  }
  return bytes;
}

std::vector<std::uint8_t> write_idx_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> bytes;
  write_u32_be(bytes, kLabelsMagic);
  write_u32_be(bytes, static_cast<std::uint32_t>(labels.size()));
  for (const int label : labels) {
    if (label < 0 || label > 9) {
      throw std::invalid_argument("write_idx_labels: label " +
                                  std::to_string(label) + " is not a digit");
    }
    bytes.push_back(static_cast<std::uint8_t>(label));
  }
  return bytes;
}

std::vector<std::uint8_t> maybe_gunzip(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b) return bytes;
  z_stream strm{};
  if (inflateInit2(&strm, 15 + 16) != Z_OK) {  // +16: expect a gzip wrapper
    throw DataError("maybe_gunzip: inflateInit2 failed");
  }
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  strm.next_in = const_cast<Bytef*>(bytes.data());
  strm.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    strm.next_out = chunk.data();
    strm.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::string msg = strm.msg ? strm.msg : "error " + std::to_string(rc);
      inflateEnd(&strm);
      throw DataError("maybe_gunzip: " + msg);
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - strm.avail_out));
    if (rc == Z_OK && strm.avail_in == 0 && strm.avail_out != 0) {
      inflateEnd(&strm);
      throw DataError("maybe_gunzip: truncated gzip stream");
    }
  }
  inflateEnd(&strm);
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_file: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read_file: failed reading " + path);
  return bytes;
}

Matrix normalize(const ByteImage& img) {
  Matrix m(img.rows, img.cols);
  for (int i = 0; i < img.rows; ++i) {
    for (int j = 0; j < img.cols; ++j) m(i, j) = img.at(i, j) / 255.0;
  }
  return m;
}

namespace {

std::string pick_file(const std::string& dir, const std::string& base) {
  const std::string gz = dir + "/" + base + ".gz";
  const std::string plain = dir + "/" + base;
  if (std::filesystem::exists(gz)) return gz;
  if (std::filesystem::exists(plain)) return plain;
  throw DataError("load_mnist_dir: missing " + base + "[.gz] in " + dir);
}

RawMnist load_pool(const std::string& dir, const std::string& images_base,
                   const std::string& labels_base, Pool source) {
  RawMnist raw;
  raw.images = parse_idx_images(maybe_gunzip(read_file(pick_file(dir, images_base))));
  raw.labels = parse_idx_labels(maybe_gunzip(read_file(pick_file(dir, labels_base))));
  raw.source = source;
  if (raw.images.size() != raw.labels.size()) {
    throw DataError("load_mnist_dir: " + images_base + " has " +
                    std::to_string(raw.images.size()) + " images but " +
                    labels_base + " has " + std::to_string(raw.labels.size()) +
                    " labels");
  }
  return raw;
}

void check_split_sizes(const char* who, const SplitSpec& spec) {
  if (spec.train_size < 1 || spec.val_size < 1 || spec.test_size < 1) {
    throw std::invalid_argument(std::string(who) +
                                ": train/val/test sizes must be >= 1");
  }
}

}  // namespace

MnistData load_mnist_dir(const std::string& dir) {
  MnistData data;
  data.train = load_pool(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                         Pool::TrainPool);
  data.test = load_pool(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
                        Pool::TestPool);
  return data;
}

BinarySplit make_binary_split(const RawMnist& raw_train, const RawMnist& raw_test,
                              int digit_p, int digit_q, const SplitSpec& spec) {
  if (digit_p < 0 || digit_p > 9 || digit_q < 0 || digit_q > 9 ||
      digit_p == digit_q) {
    throw std::invalid_argument("make_binary_split: need two distinct digits 0-9");
  }
  check_split_sizes("make_binary_split", spec);

  std::vector<std::size_t> idx_p, idx_q;
  for (std::size_t n = 0; n < raw_train.labels.size(); ++n) {
    if (raw_train.labels[n] == digit_p) idx_p.push_back(n);
    if (raw_train.labels[n] == digit_q) idx_q.push_back(n);
  }
  const int train_p = (spec.train_size + 1) / 2;
  const int train_q = spec.train_size / 2;
  const int val_p = (spec.val_size + 1) / 2;
  const int val_q = spec.val_size / 2;
  const auto need = [](const char* digit_name, int digit, std::size_t have,
                       int needed) {
    if (have < static_cast<std::size_t>(needed)) {
      throw DataError("make_binary_split: " + std::string(digit_name) + "=" +
                      std::to_string(digit) + " needs " + std::to_string(needed) +
                      " train-pool images but only " + std::to_string(have) +
                      " are available");
    }
  };
  need("p", digit_p, idx_p.size(), train_p + val_p);
  need("q", digit_q, idx_q.size(), train_q + val_q);

  Rng rng(spec.seed);
  rng.shuffle(idx_p);
  rng.shuffle(idx_q);

  BinarySplit split;
  const auto take = [&](BinaryBatch& batch, const std::vector<std::size_t>& pool,
                        int from, int count, double label) {
    for (int n = 0; n < count; ++n) {
      batch.inputs.push_back(normalize(raw_train.images[pool[from + n]]));
      batch.labels.push_back(label);
    }
  };
  take(split.train, idx_p, 0, train_p, 0.0);
  take(split.train, idx_q, 0, train_q, 1.0);
  take(split.val, idx_p, train_p, val_p, 0.0);
  take(split.val, idx_q, train_q, val_q, 1.0);

  std::vector<std::size_t> idx_test;
  for (std::size_t n = 0; n < raw_test.labels.size(); ++n) {
    if (raw_test.labels[n] == digit_p || raw_test.labels[n] == digit_q) {
      idx_test.push_back(n);
    }
  }
  if (idx_test.empty()) {
    throw DataError("make_binary_split: test pool has no images of digits " +
                    std::to_string(digit_p) + " or " + std::to_string(digit_q));
  }
  rng.shuffle(idx_test);
  const std::size_t test_count =
      std::min<std::size_t>(idx_test.size(), spec.test_size);
  for (std::size_t n = 0; n < test_count; ++n) {
    split.test.inputs.push_back(normalize(raw_test.images[idx_test[n]]));
    split.test.labels.push_back(raw_test.labels[idx_test[n]] == digit_q ? 1.0 : 0.0);
  }
  return split;
}

MulticlassSplit make_multiclass_split(const RawMnist& raw_train,
                                      const RawMnist& raw_test,
                                      const SplitSpec& spec) {
  check_split_sizes("make_multiclass_split", spec);
  std::vector<std::vector<std::size_t>> idx(10);
  for (std::size_t n = 0; n < raw_train.labels.size(); ++n) {
    idx[raw_train.labels[n]].push_back(n);
  }
  // size/10 per class, remainder to the lowest class indices
  const auto share = [](int total, int k) { return total / 10 + (k < total % 10); };
  for (int k = 0; k < 10; ++k) {
    const int needed = share(spec.train_size, k) + share(spec.val_size, k);
    if (idx[k].size() < static_cast<std::size_t>(needed)) {
      throw DataError("make_multiclass_split: class " + std::to_string(k) +
                      " needs " + std::to_string(needed) +
                      " train-pool images but only " +
                      std::to_string(idx[k].size()) + " are available");
    }
  }

  Rng rng(spec.seed);
  for (int k = 0; k < 10; ++k) rng.shuffle(idx[k]);

  std::vector<Matrix> train_inputs, val_inputs;
  std::vector<int> train_labels, val_labels;
  for (int k = 0; k < 10; ++k) {
    const int n_train = share(spec.train_size, k);
    const int n_val = share(spec.val_size, k);
    for (int n = 0; n < n_train; ++n) {
      train_inputs.push_back(normalize(raw_train.images[idx[k][n]]));
      train_labels.push_back(k);
    }
    for (int n = 0; n < n_val; ++n) {
      val_inputs.push_back(normalize(raw_train.images[idx[k][n_train + n]]));
      val_labels.push_back(k);
    }
  }

  std::vector<std::size_t> idx_test(raw_test.labels.size());
  for (std::size_t n = 0; n < idx_test.size(); ++n) idx_test[n] = n;
  if (idx_test.empty()) {
    throw DataError("make_multiclass_split: test pool is empty");
  }
  rng.shuffle(idx_test);
  const std::size_t test_count =
      std::min<std::size_t>(idx_test.size(), spec.test_size);
  std::vector<Matrix> test_inputs;
  std::vector<int> test_labels;
  for (std::size_t n = 0; n < test_count; ++n) {
    test_inputs.push_back(normalize(raw_test.images[idx_test[n]]));
    test_labels.push_back(raw_test.labels[idx_test[n]]);
  }

  MulticlassSplit split;
  split.train = make_multiclass_batch(std::move(train_inputs), train_labels, 10);
  split.val = make_multiclass_batch(std::move(val_inputs), val_labels, 10);
  split.test = make_multiclass_batch(std::move(test_inputs), test_labels, 10);
  return split;
}

}  // namespace bilinear
