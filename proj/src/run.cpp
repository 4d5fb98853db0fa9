#include "aevb/run.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aevb/errors.hpp"
#include "aevb/model_fa.hpp"
#include "aevb/model_gmvae.hpp"
#include "aevb/model_vae.hpp"
#include "aevb/model_vrnn.hpp"

#ifndef AEVB_DEFAULT_MNIST_DIR
#define AEVB_DEFAULT_MNIST_DIR "data/mnist"
#endif

namespace aevb {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'A', 'E', 'V', 'B', 'C', 'K', 'P', 'T'};
constexpr std::size_t kImageSide = 28;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n)
      throw FormatError("checkpoint: truncated at byte " + std::to_string(pos) + " (need " + std::to_string(n) +
                        " more)");
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot write");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string mnist_dir(const RunConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("AEVB_MNIST_DIR")) return env;
  return AEVB_DEFAULT_MNIST_DIR;
}

std::string idx_path(const std::string& dir, const std::string& stem) {
  const std::string gz = dir + "/" + stem + ".gz";
  if (fs::exists(gz)) return gz;
  if (fs::exists(dir + "/" + stem)) return dir + "/" + stem;
  throw FormatError(gz + ": cannot open (no plain file either)");
}

Dataset take(const Dataset& d, std::size_t n, const char* which) {
  if (n == 0) return d;
  if (n > d.size())
    throw FormatError(std::string("config: ") + which + ": " + std::to_string(n) + " exceeds the " +
                      std::to_string(d.size()) + " available examples");
  return d.subset(0, n);
}

Dataset preprocess(const Dataset& raw, const RunConfig& c, std::uint64_t stream) {
  if (c.preprocessing == "normalized") {
    SeededRng rng = SeededRng(c.data_seed).fork(stream);
    return normalize(raw, rng);
  }
  if (c.preprocessing == "binarized") return binarize(raw);
  if (c.preprocessing == "row_sequence") return to_row_sequences(binarize(raw));
  throw FormatError("config: preprocessing: '" + c.preprocessing + "' does not apply to mnist");
}

// The data-describing fields of `data` on top of `base`.
RunConfig with_data(RunConfig base, const RunConfig& data) {
  if (data.model != base.model || data.preprocessing != expected_preprocessing(base.model))
    throw FormatError("tag mismatch: checkpoint holds a " + base.model + " model (" +
                      expected_preprocessing(base.model) + " data) but the data config is " + data.model + "/" +
                      data.preprocessing);
  base.data = data.data;
  base.data_dir = data.data_dir;
  base.preprocessing = data.preprocessing;
  base.binarization = data.binarization;
  base.train_size = data.train_size;
  base.test_size = data.test_size;
  base.data_seed = data.data_seed;
  base.synthetic_n = data.synthetic_n;
  base.eval_seed = data.eval_seed;
  base.eval_draws = data.eval_draws;
  base.validate();
  return base;
}

Tensor one_hot_rows(std::size_t classes, std::size_t per_class) {
  Tensor y({classes * per_class, classes});
  auto v = y.mutable_data();
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k) v[(c * per_class + k) * classes + c] = 1.0;
  return y;
}

BatchRng rng_for(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return BatchRng::per_example(SeededRng(seed), ids);
}

}  // namespace

// ---- checkpoints

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, ckpt.version);
  put_str(out, ckpt.tag);
  put_str(out, ckpt.config_text);
  put<std::uint64_t>(out, ckpt.step);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_str(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<double>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  r.need(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("checkpoint: bad magic");
  r.pos = sizeof kMagic;
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(c.version));
  c.tag = r.str();
  c.config_text = r.str();
  c.step = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    std::vector<double> values(shape_numel(shape));
    r.need(values.size() * sizeof(double));
    std::memcpy(values.data(), bytes.data() + r.pos, values.size() * sizeof(double));
    r.pos += values.size() * sizeof(double);
    c.tensors.emplace_back(std::move(name), Tensor(shape, std::move(values)));
  }
  if (r.pos != bytes.size())
    throw FormatError("checkpoint: " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

Checkpoint make_checkpoint(LatentModel& model, const RunConfig& config, std::uint64_t step) {
  Checkpoint c;
  c.tag = model.tag();
  c.config_text = config.to_text();
  c.step = step;
  for (auto& p : model.parameters()) c.tensors.emplace_back(p.name, *p.tensor);
  return c;
}

void restore_parameters(LatentModel& model, const Checkpoint& ckpt) {
  if (ckpt.tag != model.tag())
    throw FormatError("tag mismatch: checkpoint '" + ckpt.tag + "' vs model '" + model.tag() + "'");
  auto params = model.parameters();
  if (params.size() != ckpt.tensors.size())
    throw FormatError("checkpoint: " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                      std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = ckpt.tensors[i];
    if (name != params[i].name)
      throw FormatError("checkpoint: tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                        params[i].name + "'");
    if (t.shape() != params[i].tensor->shape())
      throw FormatError("checkpoint: " + name + " has shape " + shape_str(t.shape()) + ", model expects " +
                        shape_str(params[i].tensor->shape()));
    *params[i].tensor = t;
  }
}

// ---- data and models

RunData load_run_data(const RunConfig& c) {
  c.validate();
  RunData out;
  if (c.data == "synthetic") {
    FaSyntheticSpec spec;
    spec.n = c.synthetic_n;
    spec.latent_dim = c.latent_dim;
    spec.data_dim = c.data_dim;
    spec.seed = c.data_seed;
    out.fa = generate_fa_synthetic(spec);
    out.train = take(out.fa->train, c.train_size, "train_size");
    out.test = take(out.fa->test, c.test_size, "test_size");
    return out;
  }
  const std::string dir = mnist_dir(c);
  const Dataset train_raw =
      load_idx(idx_path(dir, "train-images-idx3-ubyte"), idx_path(dir, "train-labels-idx1-ubyte"));
  const Dataset test_raw = load_idx(idx_path(dir, "t10k-images-idx3-ubyte"), idx_path(dir, "t10k-labels-idx1-ubyte"));
  out.train = take(preprocess(train_raw, c, 0), c.train_size, "train_size");
  out.test = take(preprocess(test_raw, c, 1), c.test_size, "test_size");
  return out;
}

std::unique_ptr<LatentModel> build_model(const RunConfig& c) {
  c.validate();
  SeededRng init = SeededRng(*c.seed).fork(0);
  const std::size_t pixels = kImageSide * kImageSide;
  if (c.model == "fa") return std::make_unique<FaModel>(c.data_dim, c.latent_dim, init);
  if (c.model == "vae") return std::make_unique<VaeModel>(VaeConfig{pixels, c.latent_dim, c.hidden, c.dropout}, init);
  if (c.model == "cvae")
    return std::make_unique<CvaeModel>(CvaeConfig{pixels, c.latent_dim, c.hidden, c.classes, c.dropout}, init);
  if (c.model == "gmvae")
    return std::make_unique<GmvaeModel>(
        GmvaeConfig{pixels, c.latent_dim, c.classes, c.hidden, c.tau, parse_estimator(c.estimator)}, init);
  return std::make_unique<VrnnModel>(VrnnConfig{kImageSide, kImageSide, c.latent_dim, c.state_dim, c.hidden}, init);
}

LoadedRun load_run(const std::string& checkpoint_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  LoadedRun run;
  run.config = parse_config(ckpt.config_text);
  if (run.config.model != ckpt.tag)
    throw FormatError(checkpoint_path + ": tag mismatch: header says '" + ckpt.tag + "', config says '" +
                      run.config.model + "'");
  run.model = build_model(run.config);
  restore_parameters(*run.model, ckpt);
  run.step = ckpt.step;
  return run;
}

// ---- subcommands

TrainRun run_train(const RunConfig& config, const std::string& out_dir, const StepCallback& on_step) {
  config.validate();
  TrainRun run;
  run.data = load_run_data(config);
  run.model = build_model(config);

  TrainSchedule s;
  s.mode = config.schedule == "alternating" ? ScheduleMode::Alternating : ScheduleMode::Joint;
  s.phase_length = config.phase_length;
  s.start = config.start_phase == "E" ? Phase::E : Phase::M;
  s.total_steps = config.steps;
  s.batch_size = config.batch_size;
  s.eval_every = config.eval_every;
  s.seed = *config.seed;
  s.eval_seed = config.eval_seed;
  s.eval_draws = config.eval_draws;
  s.lr = config.lr;
  s.patience = config.patience;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::string text = config.to_text();
    if (run.data.fa) {
      const FaSynthetic& fa = *run.data.fa;
      text += "# ground truth of the synthetic data (informational)\n# true_w =";
      for (double v : fa.true_w.data()) text += " " + fmt(v);
      text += "\n# true_noise_std =";
      for (double v : fa.true_noise_std.data()) text += " " + fmt(v);
      text += "\n# true_test_evidence = " + fmt(fa.true_test_evidence) + "\n";
    }
    write_file(fs::path(out_dir) / "config.txt", text);
  }

  run.result = train(*run.model, run.data.train, run.data.test, s, on_step);

  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "metrics.csv", run.result.log.to_csv());
    save_checkpoint(make_checkpoint(*run.model, config, run.result.steps_done),
                    (fs::path(out_dir) / "checkpoint.bin").string());
  }
  return run;
}

MetricsRow run_eval(const std::string& checkpoint_path, const std::optional<RunConfig>& data,
                    const std::string& out_dir) {
  LoadedRun run = load_run(checkpoint_path);
  const RunConfig c = data ? with_data(run.config, *data) : run.config;
  const RunData d = load_run_data(c);
  MetricsRow row = evaluate(*run.model, d.test, c.eval_seed, c.eval_draws);
  row.step = run.step;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "eval.csv", MetricsLog::csv_header() + "\n" + MetricsLog::csv_line(row) + "\n");
  }
  return row;
}

std::string default_generate_mode(const std::string& model) {
  if (model == "vae") return "unconditional";
  if (model == "cvae") return "per_label";
  if (model == "gmvae") return "per_cluster";
  if (model == "vrnn") return "sequential";
  throw FormatError("generate: model '" + model + "' has no generation mode");
}

GenerateResult run_generate(const std::string& checkpoint_path, const std::string& mode, std::size_t n,
                            std::uint64_t seed, const std::string& out_dir) {
  LoadedRun run = load_run(checkpoint_path);
  const std::string& model = run.config.model;
  if (model == "fa" || mode != default_generate_mode(model))
    throw FormatError("generate: mode '" + mode + "' is not available for " + model +
                      (model == "fa" ? std::string() : " (use " + default_generate_mode(model) + ")"));
  if (n == 0) throw FormatError("generate: n must be positive");

  GenerateResult g;
  g.mode = mode;
  if (model == "vae" || model == "vrnn") {
    g.cols = std::min<std::size_t>(n, 10);
    g.rows = (n + g.cols - 1) / g.cols;
    BatchRng rng = rng_for(seed, n);
    if (model == "vae") {
      Generation out = vae_generate(static_cast<const VaeModel&>(*run.model), n, rng);
      g.params = out.params;
      g.samples = out.samples;
    } else {
      VrnnGeneration out = vrnn_generate(static_cast<const VrnnModel&>(*run.model), kImageSide, n, rng);
      g.params = out.probs;
      g.samples = out.samples;
    }
    g.groups.assign(n, -1);
  } else {
    const std::size_t classes = run.config.classes;
    g.rows = classes;
    g.cols = n;
    const Tensor y = one_hot_rows(classes, n);
    BatchRng rng = rng_for(seed, classes * n);
    if (model == "cvae") {
      Generation out = cvae_generate(static_cast<const CvaeModel&>(*run.model), y, rng);
      g.params = out.params;
      g.samples = out.samples;
    } else {
      GmvaeGeneration out = gmvae_generate(static_cast<const GmvaeModel&>(*run.model), y, rng);
      g.params = out.probs;
      g.samples = out.samples;
    }
    for (std::size_t c = 0; c < classes; ++c) g.groups.insert(g.groups.end(), n, static_cast<int>(c));
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "generated.pgm", encode_pgm(g.params, g.rows, g.cols, kImageSide, kImageSide));
    const std::size_t count = g.params.dim(0), dim = g.params.dim(1);
    std::string csv = "image,group,kind";
    for (std::size_t j = 0; j < dim; ++j) csv += ",v" + std::to_string(j);
    csv += "\n";
    for (std::size_t i = 0; i < count; ++i)
      for (const auto* kind : {"param", "sample"}) {
        const Tensor& t = std::strcmp(kind, "param") == 0 ? g.params : g.samples;
        csv += std::to_string(i) + "," + std::to_string(g.groups[i]) + "," + kind;
        for (std::size_t j = 0; j < dim; ++j) csv += "," + fmt(t.at(i, j));
        csv += "\n";
      }
    write_file(fs::path(out_dir) / "generated.csv", csv);
  }
  return g;
}

Tensor run_export_latents(const std::string& checkpoint_path, const std::optional<RunConfig>& data,
                          const std::string& out_path) {
  LoadedRun run = load_run(checkpoint_path);
  if (run.config.model != "vae" && run.config.model != "cvae")
    throw FormatError("export-latents: needs a vae or cvae checkpoint, got " + run.config.model);
  const RunConfig c = data ? with_data(run.config, *data) : run.config;
  const RunData d = load_run_data(c);
  std::vector<std::uint64_t> ids(d.test.size());
  std::iota(ids.begin(), ids.end(), 0);
  const Batch b = d.test.batch(ids);
  const Tensor means = run.config.model == "vae"
                           ? latent_means(static_cast<const VaeModel&>(*run.model), b.x)
                           : latent_means(static_cast<const CvaeModel&>(*run.model), b.x, b.y);
  if (!out_path.empty()) {
    const fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const std::size_t dims = means.dim(1);
    std::string csv;
    for (std::size_t j = 0; j < dims; ++j) csv += "dim_" + std::to_string(j) + ",";
    csv += "label\n";
    for (std::size_t i = 0; i < means.dim(0); ++i) {
      for (std::size_t j = 0; j < dims; ++j) csv += fmt(means.at(i, j)) + ",";
      csv += (d.test.labels.empty() ? std::string() : std::to_string(d.test.labels[i])) + "\n";
    }
    write_file(p, csv);
  }
  return means;
}

std::string encode_pgm(const Tensor& images, std::size_t rows, std::size_t cols, std::size_t tile_h,
                       std::size_t tile_w) {
  if (images.rank() != 2 || images.dim(1) != tile_h * tile_w)
    throw ShapeError("encode_pgm: images " + shape_str(images.shape()) + " do not hold " + std::to_string(tile_h) +
                     "x" + std::to_string(tile_w) + " tiles");
  const std::size_t width = cols * tile_w, height = rows * tile_h;
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + width * height, '\0');
  for (std::size_t i = 0; i < images.dim(0) && i < rows * cols; ++i) {
    const std::size_t r0 = (i / cols) * tile_h, c0 = (i % cols) * tile_w;
    for (std::size_t y = 0; y < tile_h; ++y)
      for (std::size_t x = 0; x < tile_w; ++x) {
        const double v = std::clamp(images.at(i, y * tile_w + x), 0.0, 1.0);
        out[header + (r0 + y) * width + c0 + x] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  }
  return out;
}

}  // namespace aevb
