#include "aevb/data.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstring>

#include "aevb/errors.hpp"
#include "aevb/model_fa.hpp"

namespace aevb {

const char* preprocessing_name(Preprocessing p) {
  switch (p) {
    case Preprocessing::Raw: return "raw";
    case Preprocessing::Continuous: return "continuous";
    case Preprocessing::Normalized: return "normalized";
    case Preprocessing::Binarized: return "binarized";
    case Preprocessing::RowSequence: return "row_sequence";
  }
  return "?";
}

Batch Dataset::batch(const std::vector<std::uint64_t>& ids) const {
  const std::size_t d = dim();
  Batch b;
  b.ids = ids;
  b.x = Tensor(Shape{ids.size(), d});
  auto o = b.x.mutable_data();
  auto src = x.data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= size()) throw ShapeError("Dataset::batch: id " + std::to_string(ids[r]) + " out of range");
    std::memcpy(&o[r * d], &src[ids[r] * d], d * sizeof(double));
  }
  if (!labels.empty() && classes > 0) {
    b.y = Tensor(Shape{ids.size(), classes});
    auto y = b.y.mutable_data();
    for (std::size_t r = 0; r < ids.size(); ++r) y[r * classes + static_cast<std::size_t>(labels[ids[r]])] = 1.0;
  }
  return b;
}

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size())
    throw ShapeError("Dataset::subset: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                     std::to_string(size()));
  Dataset out = *this;
  const std::size_t d = dim();
  auto src = x.data();
  out.x = Tensor(Shape{end - begin, d}, std::vector<double>(src.begin() + begin * d, src.begin() + end * d));
  if (!labels.empty()) out.labels.assign(labels.begin() + begin, labels.begin() + end);
  return out;
}

// ---- synthetic

FaSynthetic generate_fa_synthetic(const FaSyntheticSpec& spec) {
  if (spec.n == 0) throw DomainError("generate_fa_synthetic: n must be positive");
  SeededRng root(spec.seed);
  SeededRng w_rng = root.fork(1), sd_rng = root.fork(2), train_rng = root.fork(3), test_rng = root.fork(4);
  FaGenerative truth;
  truth.w = normal_tensor({spec.data_dim, spec.latent_dim}, w_rng);
  truth.pre_sigma = normal_tensor({spec.data_dim}, sd_rng);
  if (spec.true_w) {
    if (spec.true_w->shape() != truth.w.shape())
      throw ShapeError("generate_fa_synthetic: true_w " + shape_str(spec.true_w->shape()));
    truth.w = *spec.true_w;
  }
  if (spec.true_noise_std) {
    if (spec.true_noise_std->shape() != truth.pre_sigma.shape())
      throw ShapeError("generate_fa_synthetic: true_noise_std " + shape_str(spec.true_noise_std->shape()));
    auto pre = truth.pre_sigma.mutable_data();
    for (std::size_t j = 0; j < pre.size(); ++j) {
      const double sd = (*spec.true_noise_std)[j];
      if (!(sd > 0.0)) throw DomainError("generate_fa_synthetic: noise std must be positive");
      pre[j] = std::log(std::expm1(sd));
    }
  }

  FaSynthetic out;
  out.true_w = truth.w;
  out.true_noise_std = truth.noise_std();
  Tensor train = fa_generate(truth, spec.n, train_rng);
  Tensor test = fa_generate(truth, spec.n, test_rng);

  const std::size_t d = spec.data_dim;
  out.train_mean = Tensor(Shape{d});
  auto m = out.train_mean.mutable_data();
  for (std::size_t r = 0; r < spec.n; ++r)
    for (std::size_t j = 0; j < d; ++j) m[j] += train.at(r, j) / static_cast<double>(spec.n);
  for (Tensor* t : {&train, &test}) {
    auto v = t->mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= m[i % d];
  }
  out.train.x = train;
  out.test.x = test;
  out.true_test_evidence = fa_exact_evidence(truth, test);
  return out;
}

// ---- IDX

namespace {

class GzFile {
 public:
  explicit GzFile(const std::string& path) : path_(path), f_(gzopen(path.c_str(), "rb")) {
    if (f_ == nullptr) throw FormatError(path + ": cannot open");
  }
  ~GzFile() { gzclose(f_); }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* dst, std::size_t n, const char* what) {
    const int got = gzread(f_, dst, static_cast<unsigned>(n));
    if (got < 0 || static_cast<std::size_t>(got) != n)
      throw FormatError(path_ + ": truncated while reading " + what);
  }

  std::uint32_t be32(const char* what) {
    std::array<unsigned char, 4> b{};
    read(b.data(), 4, what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  bool at_end() {
    unsigned char c;
    return gzread(f_, &c, 1) == 0;
  }

 private:
  std::string path_;
  gzFile f_;
};

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  GzFile img(images_path);
  const std::uint32_t magic = img.be32("magic");
  if (magic != 2051) throw FormatError(images_path + ": bad magic " + std::to_string(magic) + " (expected 2051)");
  const std::uint32_t count = img.be32("count"), rows = img.be32("rows"), cols = img.be32("cols");
  if (count == 0 || rows == 0 || cols == 0) throw FormatError(images_path + ": empty header extents");
  std::vector<unsigned char> pixels(std::size_t{count} * rows * cols);
  img.read(pixels.data(), pixels.size(), "pixels");
  if (!img.at_end()) throw FormatError(images_path + ": trailing bytes after pixel data");

  GzFile lab(labels_path);
  const std::uint32_t lmagic = lab.be32("magic");
  if (lmagic != 2049) throw FormatError(labels_path + ": bad magic " + std::to_string(lmagic) + " (expected 2049)");
  const std::uint32_t lcount = lab.be32("count");
  if (lcount != count)
    throw FormatError("label/image count mismatch: " + std::to_string(lcount) + " labels vs " +
                      std::to_string(count) + " images");
  std::vector<unsigned char> labels(count);
  lab.read(labels.data(), labels.size(), "labels");

  Dataset out;
  out.tag = Preprocessing::Raw;
  out.image_rows = rows;
  out.image_cols = cols;
  out.x = Tensor(Shape{count, std::size_t{rows} * cols}, std::vector<double>(pixels.begin(), pixels.end()));
  out.labels.assign(labels.begin(), labels.end());
  int max_label = 0;
  for (int l : out.labels) max_label = std::max(max_label, l);
  out.classes = static_cast<std::size_t>(max_label) + 1;
  return out;
}

namespace {

void require_raw(const Dataset& d, const char* op) {
  if (d.tag != Preprocessing::Raw)
    throw DomainError(std::string(op) + ": dataset is already " + preprocessing_name(d.tag));
}

}  // namespace

Dataset normalize(const Dataset& raw, SeededRng& rng) {
  require_raw(raw, "normalize");
  Dataset out = raw;
  for (double& v : out.x.mutable_data()) v = (v + rng.uniform()) / 256.0;
  out.tag = Preprocessing::Normalized;
  return out;
}

Dataset binarize(const Dataset& raw) {
  require_raw(raw, "binarize");
  Dataset out = raw;
  for (double& v : out.x.mutable_data()) v = v > 127.5 ? 1.0 : 0.0;
  out.tag = Preprocessing::Binarized;
  return out;
}

Dataset to_row_sequences(const Dataset& binarized) {
  if (binarized.tag != Preprocessing::Binarized)
    throw DomainError(std::string("to_row_sequences: expected binarized images, got ") +
                      preprocessing_name(binarized.tag));
  if (binarized.image_rows != 28 || binarized.image_cols != 28 || binarized.dim() != 784)
    throw ShapeError("to_row_sequences: expected 28x28 images, got " + std::to_string(binarized.image_rows) +
                     "x" + std::to_string(binarized.image_cols));
  Dataset out = binarized;
  out.tag = Preprocessing::RowSequence;
  return out;
}

}  // namespace aevb
