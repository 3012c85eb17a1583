#include "codetr/harness/case_study.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "codetr/error.hpp"

namespace codetr::harness {

std::vector<double> segment_weights(const model::RewardModel& model, const rewards::Segment& segment) {
  ad::NoGradGuard no_grad;
  const auto& cfg = model.config();
  const auto window = model::Window::one_hot(segment.states, segment.actions, cfg.state_dim, cfg.action_dim);
  return model::composite_predict(model::encode(model, window), 0, segment.length).weights;
}

int unique_argmax(std::span<const double> values) {
  if (values.empty()) return -1;
  std::size_t best = 0;
  int count = 1;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) {
      best = i;
      count = 1;
    } else if (values[i] == values[best]) {
      ++count;
    }
  }
  return count == 1 ? static_cast<int>(best) : -1;
}

CaseStudyReport case_study(const model::RewardModel& model, std::span<const envs::Trajectory> trajectories,
                           int delay, const rewards::CompositeSpec& spec, std::size_t relabel_window,
                           model::RelabelOutput output) {
  if (trajectories.empty()) throw ContractError("case_study: no trajectories");
  const auto& cfg = model.config();
  CaseStudyReport report;
  double dev_total = 0.0;
  std::size_t dev_count = 0;
  std::size_t hits = 0;
  for (std::size_t e = 0; e < trajectories.size(); ++e) {
    const auto& traj = trajectories[e];
    std::vector<int> states, actions;
    for (const auto& s : traj.steps) {
      states.push_back(s.state);
      actions.push_back(s.action);
    }
    const auto relabels = model::relabel(model, model::Window::one_hot(states, actions, cfg.state_dim, cfg.action_dim),
                                         relabel_window, output);
    const auto segments = rewards::segment_trajectory(traj, delay, spec);
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& seg = segments[k];
      const auto w = segment_weights(model, seg);
      std::vector<double> hidden;
      for (std::size_t i = 0; i < seg.length; ++i) {
        const std::size_t t = seg.start + i;
        hidden.push_back(traj.steps[t].hidden_reward);
        report.rows.push_back({e, k, t, traj.steps[t].hidden_reward, relabels[t], w[i]});
        dev_total += std::abs(w[i] - 1.0);
        ++dev_count;
      }
      if (seg.length != static_cast<std::size_t>(delay)) continue;
      ++report.segments_scored;
      const int aw = unique_argmax(w);
      const int ar = unique_argmax(hidden);
      if (aw < 0 || ar < 0) {
        ++report.tied_segments;
      } else if (aw == ar) {
        ++hits;
      }
    }
  }
  report.mean_abs_weight_dev = dev_count ? dev_total / static_cast<double>(dev_count) : 0.0;
  report.hit_rate = report.segments_scored ? static_cast<double>(hits) / static_cast<double>(report.segments_scored) : 0.0;
  report.degenerate_ties = report.tied_segments > 0;
  return report;
}

void write_case_study_csv(std::ostream& out, const CaseStudyReport& report) {
  out << "episode,segment,step,hidden_reward,relabeled_reward,weight\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%.17g,%.17g\n", r.episode, r.segment, r.step, r.hidden_reward,
                  r.relabeled_reward, r.weight);
    out << buf;
  }
}

}  // namespace codetr::harness
