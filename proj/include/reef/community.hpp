#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "reef/individual.hpp"
#include "reef/species.hpp"
#include "reef/summary.hpp"

namespace reef {

using LabelCounts = std::map<std::string, int>;

LabelCounts clip_abundance(std::span<const Individual> individuals);

struct Reallocation {
  std::map<std::string, double> abundance;  // species labels only
  std::map<std::string, double> residual;   // higher taxa without observed members, unID
  // higher-taxon label -> member species -> share of that taxon's count
  std::map<std::string, std::map<std::string, double>> fractions;
};

// Splits higher-taxon counts over observed member species in proportion to
// the members' own counts. Throws ValidationError for labels outside the
// taxonomy ("unID" is always residual).
Reallocation reallocate_higher_taxa(const LabelCounts& counts, const Taxonomy& taxonomy);

// Fills weight_g / excluded for every individual with a length. Higher-taxon
// individuals use the fraction-weighted mean of member conversions.
void assign_weights(std::vector<Individual>& individuals, const Taxonomy& taxonomy,
                    const Reallocation& reallocation, double cutoff_factor = 1.5);

std::optional<double> median_fish_distance(std::span<const Individual> individuals);

// Individuals must already carry weights (see assign_weights).
ClipSummary clip_summary(const std::string& clip_id,
                         std::span<const Individual> individuals,
                         const Taxonomy& taxonomy);

double jaccard_distance(const std::set<std::string>& a, const std::set<std::string>& b);

struct SurveyColumn {
  std::string method;
  std::string date;
  std::set<std::string> labels;
};

// Rows are labels, one 0/1 column per survey.
void write_presence_absence(std::span<const SurveyColumn> surveys, std::ostream& out);
// Square matrix of pairwise Jaccard distances between surveys.
void write_jaccard_matrix(std::span<const SurveyColumn> surveys, std::ostream& out);

}  // namespace reef
