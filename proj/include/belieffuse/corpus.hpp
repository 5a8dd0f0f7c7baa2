#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace belieffuse {

struct Utterance {
  std::string id;
  std::string conversation_id;
  std::string transcript;
  std::filesystem::path audio_path;
  double start_s = 0.0;
  double end_s = 0.0;
  double label = 0.0;  // speaker commitment in [-3, 3]

  double duration_s() const { return end_s - start_s; }
};

struct CorpusManifest {
  std::vector<Utterance> utterances;
  int sample_rate_hz = 16000;
  std::string name;

  std::size_t size() const { return utterances.size(); }
  bool is_cbp() const { return name == "CBP" || name == "cbp"; }
};

struct BinSpec {
  int n_bins = 28;
  double lo = -3.0;
  double hi = 3.0;

  double width() const { return (hi - lo) / n_bins; }
};

struct FoldPlan {
  int n_folds = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // utterance id -> fold index
};

struct SummaryStats {
  double min = 0, max = 0, mean = 0, median = 0, std_dev = 0;
};

struct CorpusStats {
  SummaryStats duration_s;
  SummaryStats word_count;
  std::vector<std::int64_t> bin_histogram;
};

// Parses a line-delimited JSON manifest (one utterance object per line) and
// validates every record. Throws with the offending line or utterance id.
CorpusManifest load_manifest(const std::filesystem::path& path);

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

// Validates a single utterance, throwing with id and field on violation.
void validate_utterance(const Utterance& utt);

// Slices [start_s, end_s) out of the source audio and resamples to
// target_rate. Output length is exactly round((end_s - start_s) * target_rate).
std::vector<double> extract_clip(const std::filesystem::path& source_audio, double start_s,
                                 double end_s, int target_rate_hz);

// Uniform-width binning over [lo, hi]; label == hi clamps into the last bin.
int discretize_label(double label, const BinSpec& spec);

// Per-bin seeded shuffle, then a round-robin deal that carries its position
// across bins so overall fold sizes also stay within one of each other.
FoldPlan build_stratified_folds(const CorpusManifest& manifest, const BinSpec& spec, int n_folds,
                                std::uint64_t seed);

CorpusStats corpus_stats(const CorpusManifest& manifest, const BinSpec& spec);

// Whitespace tokenization, as used for the word-count statistics.
std::size_t count_words(const std::string& transcript);

}  // namespace belieffuse
