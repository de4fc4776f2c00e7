#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reef {

enum class TaxonLevel { kSpecies, kMultiSpeciesGroup, kGenus, kFamily };

std::string_view to_string(TaxonLevel level);
std::optional<TaxonLevel> parse_taxon_level(std::string_view text);

// One class of the species detector. Length-weight parameters use cm and g:
// weight = lw_a * length^lw_b. Any of the numeric parameters may be absent.
struct SpeciesRecord {
  std::string label;
  TaxonLevel level = TaxonLevel::kSpecies;
  std::vector<std::string> members;
  std::optional<double> lw_a;
  std::optional<double> lw_b;
  std::optional<double> max_length_cm;

  bool has_length_weight() const { return lw_a && lw_b; }
  bool is_species() const { return level == TaxonLevel::kSpecies; }
};

bool operator==(const SpeciesRecord& a, const SpeciesRecord& b);

class Taxonomy {
 public:
  Taxonomy() = default;
  // Validates referential integrity; throws ValidationError.
  explicit Taxonomy(std::vector<SpeciesRecord> records);

  std::size_t size() const { return records_.size(); }
  bool contains(std::string_view label) const;
  const SpeciesRecord* find(std::string_view label) const;
  // Throws ValidationError naming the label when absent.
  const SpeciesRecord& at(std::string_view label) const;

  // True when `fine` is a distinct class whose member species are all
  // members of `coarse`.
  bool is_finer(std::string_view fine, std::string_view coarse) const;

  const std::map<std::string, SpeciesRecord, std::less<>>& records() const {
    return records_;
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::map<std::string, SpeciesRecord, std::less<>> records_;
  std::vector<std::string> warnings_;
};

}  // namespace reef
