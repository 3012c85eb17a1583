#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/model/reward_model.hpp"
#include "codetr/rewards/composite.hpp"

namespace codetr::harness {

struct CaseStudyRow {
  std::size_t episode = 0;
  std::size_t segment = 0;
  std::size_t step = 0;
  double hidden_reward = 0.0;
  double relabeled_reward = 0.0;
  double weight = 0.0;
};

struct CaseStudyReport {
  std::vector<CaseStudyRow> rows;
  double mean_abs_weight_dev = 0.0;
  // Full-length segments whose unique argmax of w matches the unique argmax of
  // the hidden reward. Ties on either side count as misses.
  double hit_rate = 0.0;
  std::size_t segments_scored = 0;
  std::size_t tied_segments = 0;
  bool degenerate_ties = false;
};

// Importance weights of one segment encoded as its own window.
std::vector<double> segment_weights(const model::RewardModel& model, const rewards::Segment& segment);

// Unique argmax, or -1 when the maximum is attained more than once.
int unique_argmax(std::span<const double> values);

CaseStudyReport case_study(const model::RewardModel& model, std::span<const envs::Trajectory> trajectories,
                           int delay, const rewards::CompositeSpec& spec, std::size_t relabel_window,
                           model::RelabelOutput output = model::RelabelOutput::WeightedReward);

void write_case_study_csv(std::ostream& out, const CaseStudyReport& report);

}  // namespace codetr::harness
