#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace belieffuse {

inline constexpr int kIs09Dim = 384;

struct ProsodicFeatureVector {
  std::string utterance_id;
  std::array<double, kIs09Dim> values{};
};

// Interface for IS09-style extractor backends. The reference backend below
// computes the full 16 LLD x delta x 12 functional layout in-repo at reduced
// fidelity; an external openSMILE backend can be slotted in behind the same
// contract.
class Is09Extractor {
 public:
  virtual ~Is09Extractor() = default;
  virtual std::array<double, kIs09Dim> extract(std::span<const double> waveform,
                                               int sample_rate_hz) const = 0;
  virtual std::string version() const = 0;
};

class ReferenceIs09Extractor final : public Is09Extractor {
 public:
  std::array<double, kIs09Dim> extract(std::span<const double> waveform,
                                       int sample_rate_hz) const override;
  std::string version() const override { return "reference-1"; }
};

// Canonical index -> name table (LLD-major, deltas after statics, 12
// functionals per contour).
const std::vector<std::string>& is09_feature_names();

}  // namespace belieffuse
