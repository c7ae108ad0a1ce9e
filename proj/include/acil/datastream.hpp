#ifndef ACIL_DATASTREAM_HPP
#define ACIL_DATASTREAM_HPP

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "acil/common.hpp"

namespace acil {

struct Sample {
  SampleId id = 0;
  Vector features;
  ClassId true_label = 0;
  bool annotated = false;
};

/// One arrival of data in the disjoint class-incremental protocol.
struct EpisodeData {
  int index = 0;
  std::vector<Sample> labeled;
  std::vector<Sample> unlabeled;
  std::vector<Sample> incoming_exemplars;
  std::vector<Sample> test;

  /// Classes of `labeled`, ascending. These are the episode's classes.
  std::vector<ClassId> classes() const;
};

enum class StreamSource { SyntheticGaussian, File };

struct StreamConfig {
  int num_episodes = 5;
  int classes_per_episode = 2;
  int labeled_per_class = 10;
  int unlabeled_per_class = 200;
  int test_per_class = 100;
  int feature_dim = 8;
  std::uint64_t seed = 0;
  StreamSource source = StreamSource::SyntheticGaussian;

  // Synthetic source only. Zero total_classes means exactly
  // num_episodes * classes_per_episode classes.
  int total_classes = 0;
  double sigma = 1.0;
  double separation = 4.0;  // minimum distance between class means, in units of sigma

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Labeled points read from a dataset file, in file order.
struct Dataset {
  int dim = 0;
  int num_classes = 0;
  std::vector<Sample> samples;
};

/// Deterministic Gaussian-blob stream. Class means sit on signed coordinate axes
/// (shells of growing radius when classes outnumber 2d), so every pair of means
/// is at least `separation * sigma` apart, then get a seeded rotation and offset.
std::vector<EpisodeData> generate_synthetic_stream(const StreamConfig& config);

/// Class means used by generate_synthetic_stream, one row per class.
Matrix synthetic_class_means(const StreamConfig& config);

/// Parse the text dataset format:
///   d=<int> classes=<int>
///   <class_id>,<f_1>,...,<f_d>
Dataset parse_dataset(std::istream& in, const std::string& source_name = "<stream>");
Dataset read_dataset_file(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& data);

/// Carve a dataset into episodes: classes assigned to episodes by ascending id,
/// each class's samples shuffled by the seed and split labeled/unlabeled/test.
std::vector<EpisodeData> split_dataset_stream(const Dataset& data, const StreamConfig& config);

std::vector<EpisodeData> load_file_stream(const std::filesystem::path& path,
                                          const StreamConfig& config);

/// Convert an IDX image file (magic 0x00000803) and IDX label file (0x00000801)
/// into a Dataset with pixels scaled to [0,1], flattened row-major.
/// `max_per_class` > 0 keeps only the first that many samples of each class.
Dataset convert_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    int max_per_class = 0);

/// Run-wide record of purchased labels.
class AnnotationLedger {
 public:
  /// Charge `ids` to `episode`. Ids charged before (in any episode) cost nothing.
  /// `episode` must be the current episode or the next one.
  /// Returns the number of newly charged ids.
  int charge(int episode, std::span<const SampleId> ids);

  /// Charge the samples and mark them annotated.
  int charge(int episode, std::span<Sample> samples);

  const std::vector<int>& per_episode_counts() const noexcept { return counts_; }
  bool is_charged(SampleId id) const { return charged_.contains(id); }
  std::int64_t total() const noexcept;
  int next_episode() const noexcept { return static_cast<int>(counts_.size()); }

 private:
  std::vector<int> counts_;
  std::set<SampleId> charged_;
};

AnnotationLedger charge_annotations(AnnotationLedger ledger, int episode,
                                    std::span<const SampleId> ids);

std::vector<SampleId> ids_of(std::span<const Sample> samples);

}  // namespace acil

#endif  // ACIL_DATASTREAM_HPP
