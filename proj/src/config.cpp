#include "acil/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace acil {

namespace {

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_as(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last)
    throw ConfigError("invalid value '" + text + "' for " + key, key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key, key);
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

struct KeyEntry {
  ConfigKey doc;
  Setter set;
};

template <typename T>
Setter number(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_as<T>(k, v);
  };
}

template <typename Sub, typename T>
Setter number(Sub ExperimentConfig::*sub, T Sub::*field) {
  return [sub, field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (c.*sub).*field = parse_as<T>(k, v);
  };
}

const std::vector<KeyEntry>& entries() {
  static const std::vector<KeyEntry> table = {
      {{"seed", "0", "master seed; replica r uses seed + r"}, number(&ExperimentConfig::seed)},
      {{"strategy", "acil", "acil | random | coreset | badge | icarl | gdumb | rainbow | finetuning"},
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.strategy = parse_strategy(v); }},
      {{"budget", "100", "exemplar set size k"}, number(&ExperimentConfig::budget)},
      {{"num_seeds", "5", "number of replicas"}, number(&ExperimentConfig::num_seeds)},
      {{"stream.source", "synthetic", "synthetic | file"},
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "synthetic") c.stream.source = StreamSource::SyntheticGaussian;
         else if (v == "file") c.stream.source = StreamSource::File;
         else throw ConfigError("invalid source '" + v + "'", k);
       }},
      {{"stream.path", "", "dataset file for the file source"},
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.dataset_path = v; }},
      {{"stream.num_episodes", "5", "episodes N"},
       number(&ExperimentConfig::stream, &StreamConfig::num_episodes)},
      {{"stream.classes_per_episode", "2", "new classes per episode"},
       number(&ExperimentConfig::stream, &StreamConfig::classes_per_episode)},
      {{"stream.labeled_per_class", "10", "|X^L| per class"},
       number(&ExperimentConfig::stream, &StreamConfig::labeled_per_class)},
      {{"stream.unlabeled_per_class", "200", "|X^U| per class"},
       number(&ExperimentConfig::stream, &StreamConfig::unlabeled_per_class)},
      {{"stream.test_per_class", "100", "test samples per class"},
       number(&ExperimentConfig::stream, &StreamConfig::test_per_class)},
      {{"stream.feature_dim", "8", "synthetic feature dimension"},
       number(&ExperimentConfig::stream, &StreamConfig::feature_dim)},
      {{"stream.total_classes", "0", "synthetic class count (0: num_episodes * classes_per_episode)"},
       number(&ExperimentConfig::stream, &StreamConfig::total_classes)},
      {{"stream.sigma", "1", "synthetic per-class standard deviation"},
       number(&ExperimentConfig::stream, &StreamConfig::sigma)},
      {{"stream.separation", "4", "minimum distance between class means, in sigmas"},
       number(&ExperimentConfig::stream, &StreamConfig::separation)},
      {{"train.epochs", "60", "epochs per episode"},
       number(&ExperimentConfig::train, &TrainConfig::epochs)},
      {{"train.batch_size", "32", "minibatch size"},
       number(&ExperimentConfig::train, &TrainConfig::batch_size)},
      {{"train.learning_rate", "0.05", "step size"},
       number(&ExperimentConfig::train, &TrainConfig::learning_rate)},
      {{"train.lambda", "1", "distillation weight"},
       number(&ExperimentConfig::train, &TrainConfig::lambda)},
      {{"train.temperature", "2", "distillation temperature"},
       number(&ExperimentConfig::train, &TrainConfig::temperature)},
      {{"train.alpha_mode", "balanced", "balanced (alpha = |L|/C) | constant"},
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "balanced") c.train.alpha_mode = AlphaMode::Balanced;
         else if (v == "constant") c.train.alpha_mode = AlphaMode::Constant;
         else throw ConfigError("invalid alpha mode '" + v + "'", k);
       }},
      {{"train.alpha", "1", "alpha for alpha_mode = constant"},
       number(&ExperimentConfig::train, &TrainConfig::alpha)},
      {{"train.hidden", "32", "hidden width (0: linear softmax)"},
       number(&ExperimentConfig::train, &TrainConfig::hidden)},
      {{"train.optimizer", "sgd", "sgd | adam"},
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "sgd") c.train.optimizer = Optimizer::Sgd;
         else if (v == "adam") c.train.optimizer = Optimizer::Adam;
         else throw ConfigError("invalid optimizer '" + v + "'", k);
       }},
      {{"train.warm_start", "false", "continue from the previous episode's model"},
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.warm_start = parse_bool(k, v);
       }},
      {{"train.widen_noise", "0.001", "std of the perturbation on new output rows (warm start)"},
       number(&ExperimentConfig::train, &TrainConfig::widen_noise)},
      {{"selection.pseudo_labels", "current", "current | previous model for pseudo-labels"},
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "current") c.selection.pseudo_label_source = PseudoLabelSource::Current;
         else if (v == "previous") c.selection.pseudo_label_source = PseudoLabelSource::Previous;
         else throw ConfigError("invalid pseudo-label source '" + v + "'", k);
       }},
      {{"selection.rainbow_copies", "10", "perturbed copies per sample (rainbow)"},
       number(&ExperimentConfig::selection, &SelectionOptions::rainbow_copies)},
      {{"selection.rainbow_noise", "0.05", "perturbation std as a fraction of feature std (rainbow)"},
       number(&ExperimentConfig::selection, &SelectionOptions::rainbow_noise)},
      {{"selection.kmeans_max_iterations", "100", "Lloyd iteration cap"},
       number(&ExperimentConfig::selection, &SelectionOptions::kmeans_max_iterations)},
  };
  return table;
}

const KeyEntry* find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.doc.key == key) return &e;
  return nullptr;
}

}  // namespace

ConfigValues parse_config(std::istream& in, const std::string& source_name) {
  ConfigValues values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trimmed(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'", t);
    values[trimmed(t.substr(0, eq))] = trimmed(t.substr(eq + 1));
  }
  return values;
}

ConfigValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, "config");
  return parse_config(in, path);
}

ConfigValues parse_overrides(std::span<const std::string> assignments) {
  ConfigValues values;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + a + "' is not key=value", trimmed(a));
    values[trimmed(a.substr(0, eq))] = trimmed(a.substr(eq + 1));
  }
  return values;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.doc);
    return k;
  }();
  return keys;
}

ExperimentConfig build_experiment_config(const ConfigValues& file, const ConfigValues& overrides) {
  ExperimentConfig cfg;
  ConfigValues merged;
  for (const auto& e : entries()) merged[e.doc.key] = e.doc.default_value;
  for (const auto* layer : {&file, &overrides}) {
    for (const auto& [k, v] : *layer) {
      if (!find_entry(k)) throw ConfigError("unknown config key '" + k + "'", k);
      merged[k] = v;
    }
  }
  for (const auto& e : entries()) {
    const std::string& v = merged[e.doc.key];
    if (v.empty() && e.doc.key != "stream.path")
      throw ConfigError("empty value for " + e.doc.key, e.doc.key);
    e.set(cfg, e.doc.key, v);
  }
  cfg.validate();
  return cfg;
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "seed = " << cfg.seed << '\n'
      << "strategy = " << strategy_name(cfg.strategy) << '\n'
      << "budget = " << cfg.budget << '\n'
      << "num_seeds = " << cfg.num_seeds << '\n'
      << "stream.source = " << (cfg.stream.source == StreamSource::File ? "file" : "synthetic") << '\n'
      << "stream.path = " << cfg.dataset_path.string() << '\n'
      << "stream.num_episodes = " << cfg.stream.num_episodes << '\n'
      << "stream.classes_per_episode = " << cfg.stream.classes_per_episode << '\n'
      << "stream.labeled_per_class = " << cfg.stream.labeled_per_class << '\n'
      << "stream.unlabeled_per_class = " << cfg.stream.unlabeled_per_class << '\n'
      << "stream.test_per_class = " << cfg.stream.test_per_class << '\n'
      << "stream.feature_dim = " << cfg.stream.feature_dim << '\n'
      << "stream.total_classes = " << cfg.stream.total_classes << '\n'
      << "stream.sigma = " << cfg.stream.sigma << '\n'
      << "stream.separation = " << cfg.stream.separation << '\n'
      << "train.epochs = " << cfg.train.epochs << '\n'
      << "train.batch_size = " << cfg.train.batch_size << '\n'
      << "train.learning_rate = " << cfg.train.learning_rate << '\n'
      << "train.lambda = " << cfg.train.lambda << '\n'
      << "train.temperature = " << cfg.train.temperature << '\n'
      << "train.alpha_mode = " << (cfg.train.alpha_mode == AlphaMode::Balanced ? "balanced" : "constant") << '\n'
      << "train.alpha = " << cfg.train.alpha << '\n'
      << "train.hidden = " << cfg.train.hidden << '\n'
      << "train.optimizer = " << (cfg.train.optimizer == Optimizer::Adam ? "adam" : "sgd") << '\n'
      << "train.warm_start = " << (cfg.train.warm_start ? "true" : "false") << '\n'
      << "train.widen_noise = " << cfg.train.widen_noise << '\n'
      << "selection.pseudo_labels = "
      << (cfg.selection.pseudo_label_source == PseudoLabelSource::Previous ? "previous" : "current") << '\n'
      << "selection.rainbow_copies = " << cfg.selection.rainbow_copies << '\n'
      << "selection.rainbow_noise = " << cfg.selection.rainbow_noise << '\n'
      << "selection.kmeans_max_iterations = " << cfg.selection.kmeans_max_iterations << '\n';
  return out.str();
}

}  // namespace acil
