#include "belieffuse/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "belieffuse/resample.hpp"
#include "belieffuse/wav.hpp"

namespace belieffuse {

namespace {

using nlohmann::json;

SummaryStats summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("cannot summarize empty value list");
  SummaryStats s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  const std::size_t n = values.size();
  s.median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(ss / n);  // population convention
  return s;
}

}  // namespace

void validate_utterance(const Utterance& utt) {
  if (utt.id.empty()) throw std::runtime_error("utterance has empty id");
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("utterance '" + utt.id + "': " + what);
  };
  if (utt.transcript.empty()) fail("transcript is empty");
  if (!(utt.start_s >= 0)) fail("start_s must be >= 0");
  if (!(utt.end_s > utt.start_s)) fail("end_s must exceed start_s");
  if (!(utt.label >= -3.0 && utt.label <= 3.0))
    fail("label " + std::to_string(utt.label) + " outside [-3, 3]");
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());

  CorpusManifest manifest;
  manifest.name = path.stem().string();

  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("manifest parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    // one reserved record may set corpus-level fields
    if (rec.contains("corpus_name") || rec.contains("sample_rate_hz")) {
      manifest.name = rec.value("corpus_name", manifest.name);
      manifest.sample_rate_hz = rec.value("sample_rate_hz", manifest.sample_rate_hz);
      continue;
    }
    Utterance utt;
    try {
      utt.id = rec.at("id").get<std::string>();
      utt.conversation_id = rec.value("conversation_id", std::string{});
      utt.transcript = rec.at("transcript").get<std::string>();
      utt.audio_path = rec.at("audio_path").get<std::string>();
      utt.start_s = rec.at("start_s").get<double>();
      utt.end_s = rec.at("end_s").get<double>();
      utt.label = rec.at("label").get<double>();
    } catch (const json::exception& e) {
      throw std::runtime_error("manifest record at line " + std::to_string(line_no) +
                               " is missing or mistypes a field: " + e.what());
    }
    validate_utterance(utt);
    if (!seen.insert(utt.id).second)
      throw std::runtime_error("duplicate utterance id '" + utt.id + "' at line " +
                               std::to_string(line_no));
    manifest.utterances.push_back(std::move(utt));
  }

  if (manifest.is_cbp() && manifest.size() != 338)
    throw std::runtime_error("manifest declares itself CBP but has " +
                             std::to_string(manifest.size()) + " utterances, expected 338");
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  json head;
  head["corpus_name"] = manifest.name;
  head["sample_rate_hz"] = manifest.sample_rate_hz;
  out << head.dump() << "\n";
  for (const auto& u : manifest.utterances) {
    json rec;
    rec["id"] = u.id;
    rec["conversation_id"] = u.conversation_id;
    rec["transcript"] = u.transcript;
    rec["audio_path"] = u.audio_path.string();
    rec["start_s"] = u.start_s;
    rec["end_s"] = u.end_s;
    rec["label"] = u.label;
    out << rec.dump() << "\n";
  }
}

std::vector<double> extract_clip(const std::filesystem::path& source_audio, double start_s,
                                 double end_s, int target_rate_hz) {
  if (!(start_s >= 0 && end_s > start_s))
    throw std::invalid_argument("invalid clip bounds [" + std::to_string(start_s) + ", " +
                                std::to_string(end_s) + ")");
  WavData wav = read_wav(source_audio);
  const double duration = wav.duration_s();
  if (end_s > duration + 1e-9)
    throw std::runtime_error("clip end " + std::to_string(end_s) + "s exceeds source duration " +
                             std::to_string(duration) + "s in " + source_audio.string());

  const auto first = static_cast<std::size_t>(std::llround(start_s * wav.sample_rate_hz));
  auto last = static_cast<std::size_t>(std::llround(end_s * wav.sample_rate_hz));
  last = std::min(last, wav.samples.size());

  std::span<const double> slice(wav.samples.data() + first, last - first);
  const auto out_len = static_cast<std::size_t>(std::llround((end_s - start_s) * target_rate_hz));
  if (wav.sample_rate_hz == target_rate_hz && slice.size() == out_len)
    return {slice.begin(), slice.end()};
  return resample_to_length(slice, wav.sample_rate_hz, target_rate_hz, out_len);
}

int discretize_label(double label, const BinSpec& spec) {
  if (spec.n_bins < 1 || !(spec.hi > spec.lo)) throw std::invalid_argument("invalid bin spec");
  if (!(label >= spec.lo && label <= spec.hi))
    throw std::out_of_range("label " + std::to_string(label) + " outside [" +
                            std::to_string(spec.lo) + ", " + std::to_string(spec.hi) + "]");
  int idx = static_cast<int>(std::floor((label - spec.lo) / spec.width()));
  return std::min(idx, spec.n_bins - 1);
}

FoldPlan build_stratified_folds(const CorpusManifest& manifest, const BinSpec& spec, int n_folds,
                                std::uint64_t seed) {
  if (n_folds < 2) throw std::invalid_argument("n_folds must be >= 2");
  if (manifest.size() < static_cast<std::size_t>(n_folds))
    throw std::invalid_argument("corpus of size " + std::to_string(manifest.size()) +
                                " is smaller than n_folds " + std::to_string(n_folds));

  std::vector<std::vector<std::string>> bins(spec.n_bins);
  for (const auto& u : manifest.utterances)
    bins[discretize_label(u.label, spec)].push_back(u.id);

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;

  std::mt19937_64 rng(seed);
  int next_fold = 0;  // carried across bins so overall sizes balance too
  for (auto& members : bins) {
    std::shuffle(members.begin(), members.end(), rng);
    for (const auto& id : members) {
      plan.assignment[id] = next_fold;
      next_fold = (next_fold + 1) % n_folds;
    }
  }
  return plan;
}

CorpusStats corpus_stats(const CorpusManifest& manifest, const BinSpec& spec) {
  std::vector<double> durations, words;
  CorpusStats stats;
  stats.bin_histogram.assign(spec.n_bins, 0);
  durations.reserve(manifest.size());
  words.reserve(manifest.size());
  for (const auto& u : manifest.utterances) {
    durations.push_back(u.duration_s());
    words.push_back(static_cast<double>(count_words(u.transcript)));
    ++stats.bin_histogram[static_cast<std::size_t>(discretize_label(u.label, spec))];
  }
  stats.duration_s = summarize(std::move(durations));
  stats.word_count = summarize(std::move(words));
  return stats;
}

std::size_t count_words(const std::string& transcript) {
  std::istringstream ss(transcript);
  std::string tok;
  std::size_t n = 0;
  while (ss >> tok) ++n;
  return n;
}

}  // namespace belieffuse
