#include "aevb/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "aevb/errors.hpp"

namespace aevb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty())
    throw FormatError("config: " + key + ": cannot parse '" + value + "'");
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Field field(T RunConfig::*member) {
  Field f;
  if constexpr (std::is_same_v<T, std::string>) {
    f.get = [member](const RunConfig& c) { return c.*member; };
    f.set = [member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; };
  } else if constexpr (std::is_same_v<T, double>) {
    f.get = [member](const RunConfig& c) { return format_double(c.*member); };
    f.set = [member](RunConfig& c, const std::string& k, const std::string& v) {
      c.*member = parse_number<double>(k, v);
    };
  } else {
    f.get = [member](const RunConfig& c) { return std::to_string(c.*member); };
    f.set = [member](RunConfig& c, const std::string& k, const std::string& v) {
      if (!v.empty() && v[0] == '-') throw FormatError("config: " + k + ": must be non-negative, got '" + v + "'");
      c.*member = parse_number<T>(k, v);
    };
  }
  return f;
}

// Serialization order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("model", field(&RunConfig::model));
    t.emplace_back("estimator", field(&RunConfig::estimator));
    t.emplace_back("latent_dim", field(&RunConfig::latent_dim));
    t.emplace_back("classes", field(&RunConfig::classes));
    t.emplace_back("hidden", field(&RunConfig::hidden));
    t.emplace_back("state_dim", field(&RunConfig::state_dim));
    t.emplace_back("dropout", field(&RunConfig::dropout));
    t.emplace_back("tau", field(&RunConfig::tau));
    t.emplace_back("data", field(&RunConfig::data));
    t.emplace_back("data_dir", field(&RunConfig::data_dir));
    t.emplace_back("preprocessing", field(&RunConfig::preprocessing));
    t.emplace_back("binarization", field(&RunConfig::binarization));
    t.emplace_back("train_size", field(&RunConfig::train_size));
    t.emplace_back("test_size", field(&RunConfig::test_size));
    t.emplace_back("data_dim", field(&RunConfig::data_dim));
    t.emplace_back("synthetic_n", field(&RunConfig::synthetic_n));
    t.emplace_back("data_seed", field(&RunConfig::data_seed));
    Field seed;
    seed.get = [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); };
    seed.set = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = parse_number<std::uint64_t>(k, v);
    };
    t.emplace_back("seed", seed);
    t.emplace_back("schedule", field(&RunConfig::schedule));
    t.emplace_back("phase_length", field(&RunConfig::phase_length));
    t.emplace_back("start_phase", field(&RunConfig::start_phase));
    t.emplace_back("steps", field(&RunConfig::steps));
    t.emplace_back("batch_size", field(&RunConfig::batch_size));
    t.emplace_back("lr", field(&RunConfig::lr));
    t.emplace_back("eval_every", field(&RunConfig::eval_every));
    t.emplace_back("eval_seed", field(&RunConfig::eval_seed));
    t.emplace_back("eval_draws", field(&RunConfig::eval_draws));
    t.emplace_back("patience", field(&RunConfig::patience));
    return t;
  }();
  return table;
}

const Field& lookup(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw FormatError("config: unknown key '" + key + "'");
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw FormatError("config: " + key + ": " + what);
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (v == o) return true;
  return false;
}

}  // namespace

std::string expected_preprocessing(const std::string& model) {
  if (model == "fa") return "continuous";
  if (model == "vae" || model == "cvae") return "normalized";
  if (model == "gmvae") return "binarized";
  if (model == "vrnn") return "row_sequence";
  throw FormatError("config: model: unknown model '" + model + "'");
}

RunConfig RunConfig::defaults(const std::string& model) {
  RunConfig c;
  c.model = model;
  c.preprocessing = expected_preprocessing(model);
  if (model == "fa") return c;
  c.data = "mnist";
  c.batch_size = 100;
  c.steps = 20000;
  c.eval_every = 500;
  if (model == "vae" || model == "cvae") {
    c.latent_dim = 20;
    c.hidden = 500;
    c.dropout = 0.1;
    c.lr = 3e-4;
  } else if (model == "gmvae") {
    c.latent_dim = 20;
    c.hidden = 500;
    c.lr = 1e-3;
  } else {
    c.latent_dim = 2;
    c.state_dim = 64;
    c.hidden = 64;
    c.lr = 1e-3;
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) { lookup(key).set(*this, key, value); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  require(one_of(model, {"fa", "vae", "cvae", "gmvae", "vrnn"}), "model", "unknown model '" + model + "'");
  require(seed.has_value(), "seed", "required (set it in the config or pass --seed)");
  require(one_of(estimator, {"marginalized", "gumbel_logprob", "gumbel_kl"}), "estimator",
          "unknown estimator '" + estimator + "'");
  require(model == "gmvae" || estimator == "marginalized", "estimator", "only gmvae has estimator variants");
  require(latent_dim >= 1, "latent_dim", "must be >= 1");
  require(classes >= 1, "classes", "must be >= 1");
  require(hidden >= 1, "hidden", "must be >= 1");
  require(state_dim >= 1, "state_dim", "must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout", "must lie in [0, 1)");
  require(tau > 0.0, "tau", "must be positive");
  require(one_of(data, {"synthetic", "mnist"}), "data", "unknown source '" + data + "'");
  require((model == "fa") == (data == "synthetic"), "data",
          model == "fa" ? "fa trains on synthetic data" : model + " trains on mnist");
  require(preprocessing == expected_preprocessing(model), "preprocessing",
          "'" + preprocessing + "' does not match model " + model + " (expected " + expected_preprocessing(model) +
              ")");
  require(binarization == "threshold", "binarization", "only threshold is supported");
  require(data_dim >= 1, "data_dim", "must be >= 1");
  require(synthetic_n >= 1, "synthetic_n", "must be >= 1");
  require(one_of(schedule, {"joint", "alternating"}), "schedule", "must be joint or alternating");
  require(phase_length >= 1, "phase_length", "must be >= 1");
  require(one_of(start_phase, {"E", "M"}), "start_phase", "must be E or M");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(lr >= 0.0, "lr", "must be non-negative");
  require(eval_every >= 1, "eval_every", "must be >= 1");
  require(eval_draws >= 1, "eval_draws", "must be >= 1");
}

RunConfig parse_config(const std::string& text, const std::optional<RunConfig>& base) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    lookup(key);
    if (seen.count(key))
      throw FormatError("config: " + key + ": set twice (lines " + std::to_string(seen[key]) + " and " +
                        std::to_string(lineno) + ")");
    seen[key] = lineno;
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }

  RunConfig c;
  if (base) {
    c = *base;
    for (const auto& [k, v] : entries)
      if (k == "model" && v != c.model)
        throw FormatError("config: model: '" + v + "' conflicts with preset model '" + c.model + "'");
  } else {
    std::string model = "fa";
    for (const auto& [k, v] : entries)
      if (k == "model") model = v;
    expected_preprocessing(model);
    c = RunConfig::defaults(model);
  }
  for (const auto& [k, v] : entries) c.set(k, v);
  return c;
}

RunConfig load_config_file(const std::string& path, const std::optional<RunConfig>& base) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open config");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), base);
}

namespace {

Preset make(const std::string& name, const std::string& description, const std::string& model,
            const std::function<void(RunConfig&)>& tweak) {
  Preset p{name, description, RunConfig::defaults(model)};
  p.config.seed = 0;
  tweak(p.config);
  return p;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      make("fa-experiment-1", "factor analysis, joint updates, 5000 steps", "fa", [](RunConfig&) {}),
      make("fa-experiment-2", "factor analysis, alternating 1000-step E/M phases, 4000 steps", "fa",
           [](RunConfig& c) {
             c.schedule = "alternating";
             c.phase_length = 1000;
             c.start_phase = "E";
             c.steps = 4000;
             c.eval_every = 50;
             c.eval_draws = 16;
           }),
      make("vae", "VAE on normalized MNIST, all bundled images", "vae", [](RunConfig& c) { c.patience = 10; }),
      make("cvae", "conditional VAE on normalized MNIST, all bundled images", "cvae",
           [](RunConfig& c) { c.patience = 10; }),
      make("gmvae", "Gaussian mixture VAE on binarized MNIST, one eval per epoch", "gmvae",
           [](RunConfig& c) {
             c.steps = 8000;
             c.eval_every = 80;
           }),
      make("vrnn", "variational RNN over binarized MNIST rows", "vrnn", [](RunConfig& c) { c.patience = 10; }),
      make("vae-desk", "VAE, 1000 training images, 20 evaluations", "vae",
           [](RunConfig& c) {
             c.train_size = 1000;
             c.test_size = 500;
             c.steps = 200;
             c.eval_every = 10;
           }),
      make("cvae-desk", "conditional VAE, 1000 training images, 20 evaluations", "cvae",
           [](RunConfig& c) {
             c.train_size = 1000;
             c.test_size = 500;
             c.steps = 200;
             c.eval_every = 10;
           }),
      make("gmvae-desk", "Gaussian mixture VAE, 2000 training images, L=5, 30 epochs", "gmvae",
           [](RunConfig& c) {
             c.train_size = 2000;
             c.test_size = 500;
             c.latent_dim = 5;
             c.hidden = 128;
             c.steps = 600;
             c.eval_every = 20;
           }),
      make("vrnn-desk", "variational RNN, 1000 training sequences, 20 evaluations", "vrnn",
           [](RunConfig& c) {
             c.train_size = 1000;
             c.test_size = 500;
             c.steps = 200;
             c.eval_every = 10;
           }),
  };
  return table;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw FormatError("unknown preset '" + name + "' (known: " + known + ")");
}

}  // namespace aevb
