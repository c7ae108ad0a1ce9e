#include "acil/datastream.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "acil/random.hpp"

namespace acil {

std::vector<ClassId> EpisodeData::classes() const {
  std::set<ClassId> seen;
  for (const auto& s : labeled) seen.insert(s.true_label);
  return {seen.begin(), seen.end()};
}

void StreamConfig::validate() const {
  auto require_positive = [](int v, const char* key) {
    if (v < 1) throw ConfigError(std::string(key) + " must be >= 1", key);
  };
  require_positive(num_episodes, "stream.num_episodes");
  require_positive(classes_per_episode, "stream.classes_per_episode");
  require_positive(labeled_per_class, "stream.labeled_per_class");
  require_positive(unlabeled_per_class, "stream.unlabeled_per_class");
  require_positive(test_per_class, "stream.test_per_class");
  if (source == StreamSource::SyntheticGaussian) {
    require_positive(feature_dim, "stream.feature_dim");
    if (total_classes < 0)
      throw ConfigError("stream.total_classes must be >= 0", "stream.total_classes");
    if (total_classes > 0 && num_episodes * classes_per_episode > total_classes)
      throw ConfigError("num_episodes * classes_per_episode exceeds stream.total_classes (" +
                            std::to_string(num_episodes * classes_per_episode) + " > " +
                            std::to_string(total_classes) + ")",
                        "stream.total_classes");
    if (!(sigma > 0.0)) throw ConfigError("stream.sigma must be > 0", "stream.sigma");
    if (!(separation > 0.0))
      throw ConfigError("stream.separation must be > 0", "stream.separation");
  }
}

Matrix synthetic_class_means(const StreamConfig& config) {
  const int dim = config.feature_dim;
  const int count = config.total_classes > 0 ? config.total_classes
                                             : config.num_episodes * config.classes_per_episode;
  const double gap = config.separation * config.sigma;

  // Slots on +/- coordinate axes, one shell per 2d classes.
  Matrix slots = Matrix::Zero(count, dim);
  for (int s = 0; s < count; ++s) {
    const int shell = s / (2 * dim);
    const int within = s % (2 * dim);
    const int axis = within % dim;
    const double sign = within < dim ? 1.0 : -1.0;
    slots(s, axis) = sign * (gap / std::sqrt(2.0) + shell * gap);
  }

  Rng rng(derive_seed(config.seed, 0, "means"));
  Matrix gauss(dim, dim);
  for (Eigen::Index j = 0; j < gauss.cols(); ++j)
    for (Eigen::Index i = 0; i < gauss.rows(); ++i) gauss(i, j) = standard_normal(rng);
  const Matrix rotation = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
  Vector offset(dim);
  for (Eigen::Index i = 0; i < offset.size(); ++i) offset[i] = gap * standard_normal(rng);

  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  shuffle(order, rng);

  Matrix means(count, dim);
  for (int c = 0; c < count; ++c) {
    means.row(c) = (rotation * slots.row(order[static_cast<std::size_t>(c)]).transpose() + offset)
                       .transpose();
  }
  return means;
}

std::vector<EpisodeData> generate_synthetic_stream(const StreamConfig& config) {
  if (config.source != StreamSource::SyntheticGaussian)
    throw ConfigError("generate_synthetic_stream requires the synthetic source", "stream.source");
  config.validate();

  const Matrix means = synthetic_class_means(config);
  Rng rng(derive_seed(config.seed, 0, "samples"));
  SampleId next_id = 0;

  auto draw = [&](ClassId c, bool annotated) {
    Sample s;
    s.id = next_id++;
    s.true_label = c;
    s.annotated = annotated;
    s.features.resize(config.feature_dim);
    for (int j = 0; j < config.feature_dim; ++j)
      s.features[j] = means(c, j) + config.sigma * standard_normal(rng);
    return s;
  };

  std::vector<EpisodeData> stream(static_cast<std::size_t>(config.num_episodes));
  for (int n = 0; n < config.num_episodes; ++n) {
    EpisodeData& ep = stream[static_cast<std::size_t>(n)];
    ep.index = n;
    for (int k = 0; k < config.classes_per_episode; ++k) {
      const ClassId c = n * config.classes_per_episode + k;
      for (int i = 0; i < config.labeled_per_class; ++i) ep.labeled.push_back(draw(c, true));
      for (int i = 0; i < config.unlabeled_per_class; ++i) ep.unlabeled.push_back(draw(c, false));
      for (int i = 0; i < config.test_per_class; ++i) ep.test.push_back(draw(c, false));
    }
  }
  return stream;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

Dataset parse_dataset(std::istream& in, const std::string& source_name) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source_name + ":" + std::to_string(line_no) + ": " + what, line_no);
  };

  // Header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  {
    std::istringstream header(line);
    std::string a, b;
    header >> a >> b;
    if (a.rfind("d=", 0) != 0 || b.rfind("classes=", 0) != 0 ||
        !parse_number(std::string_view(a).substr(2), data.dim) ||
        !parse_number(std::string_view(b).substr(8), data.num_classes) || data.dim < 1 ||
        data.num_classes < 1)
      throw fail("expected header 'd=<int> classes=<int>'");
  }

  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    ++record;
    Sample s;
    s.id = static_cast<SampleId>(record - 1);
    s.features.resize(data.dim);

    std::size_t field = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = view.find(',', start);
      const std::string_view token =
          view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      if (field == 0) {
        if (!parse_number(token, s.true_label) || s.true_label < 0)
          throw fail("record " + std::to_string(record) + ": bad class id '" + std::string(token) +
                     "'");
        if (s.true_label >= data.num_classes)
          throw fail("record " + std::to_string(record) + ": class id " +
                     std::to_string(s.true_label) + " >= classes=" +
                     std::to_string(data.num_classes));
      } else {
        if (field > static_cast<std::size_t>(data.dim))
          throw fail("record " + std::to_string(record) + ": more than d=" +
                     std::to_string(data.dim) + " features");
        double v = 0.0;
        if (!parse_number(token, v))
          throw fail("record " + std::to_string(record) + ": bad feature " +
                     std::to_string(field) + " '" + std::string(token) + "'");
        s.features[static_cast<Eigen::Index>(field - 1)] = v;
      }
      ++field;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (field - 1 != static_cast<std::size_t>(data.dim))
      throw fail("record " + std::to_string(record) + ": has " + std::to_string(field - 1) +
                 " features, expected d=" + std::to_string(data.dim));
    data.samples.push_back(std::move(s));
  }
  return data;
}

Dataset read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetMissing("cannot open dataset file " + path.string());
  return parse_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "d=" << data.dim << " classes=" << data.num_classes << '\n';
  std::array<char, 64> buf{};
  for (const auto& s : data.samples) {
    out << s.true_label;
    for (Eigen::Index j = 0; j < s.features.size(); ++j) {
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), s.features[j]);
      out << ',' << std::string_view(buf.data(), static_cast<std::size_t>(ptr - buf.data()));
    }
    out << '\n';
  }
}

std::vector<EpisodeData> split_dataset_stream(const Dataset& data, const StreamConfig& config) {
  config.validate();
  std::map<ClassId, std::vector<Sample>> by_class;
  for (const auto& s : data.samples) by_class[s.true_label].push_back(s);

  const int needed_classes = config.num_episodes * config.classes_per_episode;
  if (static_cast<int>(by_class.size()) < needed_classes)
    throw ConfigError("dataset has " + std::to_string(by_class.size()) + " classes, need " +
                          std::to_string(needed_classes),
                      "stream.classes_per_episode");
  const int per_class = config.labeled_per_class + config.unlabeled_per_class + config.test_per_class;

  std::vector<EpisodeData> stream(static_cast<std::size_t>(config.num_episodes));
  auto it = by_class.begin();
  for (int n = 0; n < config.num_episodes; ++n) {
    EpisodeData& ep = stream[static_cast<std::size_t>(n)];
    ep.index = n;
    for (int k = 0; k < config.classes_per_episode; ++k, ++it) {
      auto& [cls, members] = *it;
      if (static_cast<int>(members.size()) < per_class)
        throw ConfigError("class " + std::to_string(cls) + " has " +
                              std::to_string(members.size()) + " samples, need " +
                              std::to_string(per_class),
                          "stream.unlabeled_per_class");
      Rng rng(derive_seed(config.seed, 0, "file-split", cls));
      shuffle(members, rng);
      auto pos = members.begin();
      for (int i = 0; i < config.labeled_per_class; ++i, ++pos) {
        pos->annotated = true;
        ep.labeled.push_back(*pos);
      }
      for (int i = 0; i < config.unlabeled_per_class; ++i, ++pos) {
        pos->annotated = false;
        ep.unlabeled.push_back(*pos);
      }
      for (int i = 0; i < config.test_per_class; ++i, ++pos) {
        pos->annotated = false;
        ep.test.push_back(*pos);
      }
    }
  }
  return stream;
}

std::vector<EpisodeData> load_file_stream(const std::filesystem::path& path,
                                          const StreamConfig& config) {
  return split_dataset_stream(read_dataset_file(path), config);
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4))
    throw ParseError("truncated IDX header in " + what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

Dataset convert_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    int max_per_class) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw DatasetMissing("cannot open IDX image file " + images.string());
  std::ifstream lab(labels, std::ios::binary);
  if (!lab) throw DatasetMissing("cannot open IDX label file " + labels.string());

  if (read_be32(img, images.string()) != 0x00000803u)
    throw ParseError(images.string() + ": bad image magic, expected 0x00000803");
  const std::uint32_t count = read_be32(img, images.string());
  const std::uint32_t rows = read_be32(img, images.string());
  const std::uint32_t cols = read_be32(img, images.string());

  if (read_be32(lab, labels.string()) != 0x00000801u)
    throw ParseError(labels.string() + ": bad label magic, expected 0x00000801");
  const std::uint32_t label_count = read_be32(lab, labels.string());
  if (label_count != count)
    throw ParseError("image count " + std::to_string(count) + " != label count " +
                     std::to_string(label_count));

  Dataset data;
  data.dim = static_cast<int>(rows * cols);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(rows) * cols);
  std::map<ClassId, int> kept;
  int max_label = -1;
  for (std::uint32_t i = 0; i < count; ++i) {
    char label = 0;
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())) ||
        !lab.read(&label, 1))
      throw ParseError("IDX payload truncated at item " + std::to_string(i));
    const ClassId cls = static_cast<unsigned char>(label);
    if (max_per_class > 0 && kept[cls] >= max_per_class) continue;
    ++kept[cls];
    max_label = std::max(max_label, cls);
    Sample s;
    s.id = static_cast<SampleId>(data.samples.size());
    s.true_label = cls;
    s.features.resize(data.dim);
    for (std::size_t p = 0; p < pixels.size(); ++p)
      s.features[static_cast<Eigen::Index>(p)] = pixels[p] / 255.0;
    data.samples.push_back(std::move(s));
  }
  data.num_classes = max_label + 1;
  return data;
}

int AnnotationLedger::charge(int episode, std::span<const SampleId> ids) {
  const int next = next_episode();
  if (episode == next) {
    counts_.push_back(0);
  } else if (episode != next - 1) {
    throw ContractViolation("ledger charge for episode " + std::to_string(episode) +
                            ", expected " + std::to_string(std::max(0, next - 1)) + " or " +
                            std::to_string(next));
  }
  int added = 0;
  for (SampleId id : ids)
    if (charged_.insert(id).second) ++added;
  counts_.back() += added;
  return added;
}

int AnnotationLedger::charge(int episode, std::span<Sample> samples) {
  const auto ids = ids_of(samples);
  const int added = charge(episode, std::span<const SampleId>(ids));
  for (auto& s : samples) s.annotated = true;
  return added;
}

std::int64_t AnnotationLedger::total() const noexcept {
  std::int64_t sum = 0;
  for (int c : counts_) sum += c;
  return sum;
}

AnnotationLedger charge_annotations(AnnotationLedger ledger, int episode,
                                    std::span<const SampleId> ids) {
  ledger.charge(episode, ids);
  return ledger;
}

std::vector<SampleId> ids_of(std::span<const Sample> samples) {
  std::vector<SampleId> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.id);
  return ids;
}

}  // namespace acil
