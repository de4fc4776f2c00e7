#include "reef/community.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "reef/biometry.hpp"
#include "reef/error.hpp"
#include "reef/textio.hpp"

namespace reef {

double ClipSummary::total_abundance() const {
  double total = 0;
  for (const auto& [label, n] : abundance) total += n;
  for (const auto& [label, n] : residual) total += n;
  return total;
}

LabelCounts clip_abundance(std::span<const Individual> individuals) {
  LabelCounts counts;
  for (const auto& ind : individuals) ++counts[ind.class_label];
  return counts;
}

Reallocation reallocate_higher_taxa(const LabelCounts& counts, const Taxonomy& taxonomy) {
  Reallocation out;
  for (const auto& [label, n] : counts) {
    if (label == kUnidentifiedLabel) {
      out.residual[label] += n;
      continue;
    }
    const SpeciesRecord* rec = taxonomy.find(label);
    if (!rec) throw ValidationError("label", "'" + label + "' is not in the species table");
    if (rec->is_species()) out.abundance[label] += n;
  }
  for (const auto& [label, n] : counts) {
    if (label == kUnidentifiedLabel) continue;
    const SpeciesRecord& rec = taxonomy.at(label);
    if (rec.is_species()) continue;
    double observed = 0;
    for (const auto& m : rec.members) {
      auto it = counts.find(m);
      if (it != counts.end()) observed += it->second;
    }
    if (observed <= 0) {
      out.residual[label] += n;
      continue;
    }
    auto& shares = out.fractions[label];
    for (const auto& m : rec.members) {
      auto it = counts.find(m);
      if (it == counts.end() || it->second <= 0) continue;
      const double share = it->second / observed;
      shares[m] = share;
      out.abundance[m] += n * share;
    }
  }
  return out;
}

namespace {

struct MemberMix {
  double weighted = 0;
  double weight_sum = 0;
  int excluded = 0;
};

MemberMix mix_members(double length_cm, const Taxonomy& taxonomy,
                      const std::map<std::string, double>& shares, double cutoff) {
  MemberMix mix;
  for (const auto& [member, share] : shares) {
    const auto r = length_to_weight(length_cm, taxonomy.at(member), cutoff);
    if (r.status == WeightResult::Status::kWeighed) {
      mix.weighted += share * r.grams;
      mix.weight_sum += share;
    } else if (r.status == WeightResult::Status::kExcluded) {
      ++mix.excluded;
    }
  }
  return mix;
}

}  // namespace

void assign_weights(std::vector<Individual>& individuals, const Taxonomy& taxonomy,
                    const Reallocation& reallocation, double cutoff_factor) {
  for (auto& ind : individuals) {
    ind.weight_g.reset();
    ind.excluded = false;
    if (!ind.length_cm || ind.class_label == kUnidentifiedLabel) continue;
    const SpeciesRecord& rec = taxonomy.at(ind.class_label);
    const double length = *ind.length_cm;

    if (rec.is_species()) {
      const auto r = length_to_weight(length, rec, cutoff_factor);
      if (r.status == WeightResult::Status::kWeighed) ind.weight_g = r.grams;
      ind.excluded = r.status == WeightResult::Status::kExcluded;
      continue;
    }

    if (rec.max_length_cm && length > cutoff_factor * *rec.max_length_cm) {
      ind.excluded = true;
      continue;
    }
    auto shares_it = reallocation.fractions.find(ind.class_label);
    if (shares_it != reallocation.fractions.end()) {
      const MemberMix mix = mix_members(length, taxonomy, shares_it->second, cutoff_factor);
      if (mix.weight_sum > 0) {
        ind.weight_g = mix.weighted / mix.weight_sum;
        continue;
      }
      if (mix.excluded > 0) {
        ind.excluded = true;
        continue;
      }
    }
    if (rec.has_length_weight()) {
      ind.weight_g = *rec.lw_a * std::pow(length, *rec.lw_b);
      continue;
    }
    std::map<std::string, double> equal;
    for (const auto& m : rec.members) equal[m] = 1.0;
    const MemberMix mix = mix_members(length, taxonomy, equal, cutoff_factor);
    if (mix.weight_sum > 0) {
      ind.weight_g = mix.weighted / mix.weight_sum;
    } else if (mix.excluded > 0) {
      ind.excluded = true;
    }
  }
}

std::optional<double> median_fish_distance(std::span<const Individual> individuals) {
  std::vector<double> d;
  for (const auto& ind : individuals)
    for (const auto& c : ind.centers) d.push_back(c.position.norm());
  if (d.empty()) return std::nullopt;
  return percentile(std::move(d), 0.5);
}

ClipSummary clip_summary(const std::string& clip_id, std::span<const Individual> individuals,
                         const Taxonomy& taxonomy) {
  ClipSummary s;
  s.clip_id = clip_id;
  const Reallocation re = reallocate_higher_taxa(clip_abundance(individuals), taxonomy);
  s.abundance = re.abundance;
  s.residual = re.residual;
  for (const auto& [label, n] : s.abundance) {
    if (n > 0) ++s.richness;
    s.biomass_by_label[label] = 0;
  }
  for (const auto& [label, n] : s.residual) s.biomass_by_label[label] = 0;

  for (const auto& ind : individuals) {
    if (ind.excluded || !ind.weight_g) continue;
    const double w = *ind.weight_g;
    s.biomass_g += w;
    auto shares = re.fractions.find(ind.class_label);
    if (shares == re.fractions.end()) {
      s.biomass_by_label[ind.class_label] += w;
    } else {
      for (const auto& [member, share] : shares->second) s.biomass_by_label[member] += w * share;
    }
  }
  s.median_distance_m = median_fish_distance(individuals);
  return s;
}

double jaccard_distance(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t shared = 0;
  for (const auto& x : a) shared += b.count(x);
  const std::size_t uni = a.size() + b.size() - shared;
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(shared) / static_cast<double>(uni);
}

namespace {

std::string survey_name(const SurveyColumn& s) { return s.method + ":" + s.date; }

}  // namespace

void write_presence_absence(std::span<const SurveyColumn> surveys, std::ostream& out) {
  std::set<std::string> labels;
  for (const auto& s : surveys) labels.insert(s.labels.begin(), s.labels.end());
  out << "label";
  for (const auto& s : surveys) out << ',' << survey_name(s);
  out << '\n';
  for (const auto& label : labels) {
    out << label;
    for (const auto& s : surveys) out << ',' << (s.labels.count(label) ? 1 : 0);
    out << '\n';
  }
}

void write_jaccard_matrix(std::span<const SurveyColumn> surveys, std::ostream& out) {
  out << "survey";
  for (const auto& s : surveys) out << ',' << survey_name(s);
  out << '\n';
  for (const auto& a : surveys) {
    out << survey_name(a);
    for (const auto& b : surveys)
      out << ',' << textio::format_double(jaccard_distance(a.labels, b.labels));
    out << '\n';
  }
}

}  // namespace reef
