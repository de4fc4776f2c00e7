#pragma once

#include <map>
#include <optional>
#include <string>

namespace reef {

// Per-clip community record.
struct ClipSummary {
  std::string clip_id;
  // Species-level abundance after reallocation (fractional allowed).
  std::map<std::string, double> abundance;
  // Counts that stay under a higher-taxon label or "unID".
  std::map<std::string, double> residual;
  // Biomass attributed to every label present in abundance or residual.
  std::map<std::string, double> biomass_by_label;
  int richness = 0;
  double biomass_g = 0;
  std::optional<double> median_distance_m;
  std::optional<double> volume_m3;

  double total_abundance() const;

  friend bool operator==(const ClipSummary&, const ClipSummary&) = default;
};

}  // namespace reef
