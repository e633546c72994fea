// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "splitaudit/signatures.hpp"
#include "splitaudit/stats.hpp"

#ifdef SPLITAUDIT_HAVE_OPENMP
#include <omp.h>
#endif

namespace splitaudit::optimize {

namespace {

constexpr double kImprovementEpsilon = 1e-12;

std::vector<SetLabel> active_sets(bool has_validation) {
  if (has_validation) return {SetLabel::Train, SetLabel::Val, SetLabel::Test};
  return {SetLabel::Train, SetLabel::Test};
}

double total_variation(const std::vector<std::int64_t>& counts, std::int64_t total,
                       const std::vector<double>& reference) {
  if (total <= 0) return 1.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    sum += std::abs(static_cast<double>(counts[p]) / static_cast<double>(total) - reference[p]);
  }
  return 0.5 * sum;
}

}  // namespace

void Objective::validate() const {
  bool any_positive = false;
  auto check = [&](double w) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw OptimizeError("objective weights must be finite and non-negative");
    any_positive = any_positive || w > 0.0;
  };
  for (const auto& per_set : category_weights) {
    for (double w : per_set) check(w);
  }
  check(divergence_weight);
  check(disparity_weight);
  if (!any_positive) throw OptimizeError("at least one objective weight must be positive");
}

double score(const Dataset& dataset, const SplitAssignment& assignment, const Objective& objective,
             const coverage::CoverageOptions& options) {
  objective.validate();
  if (auto violations = validate(assignment, dataset); !violations.empty()) {
    throw OptimizeError("invalid assignment: " + violations.front().code + " (" + violations.front().detail + ")");
  }
  const auto report = coverage::coverage_report(dataset, assignment, options);
  const auto active = assignment.active_sets();

  double total = 0.0;
  for (auto c : coverage::kCategories) {
    const auto counts = report.category(c).unrepresented_count();
    for (auto s : active) {
      total += objective.category_weights[coverage::category_slot(c)][set_slot(s)] *
               static_cast<double>(counts[set_slot(s)]);
    }
  }

  const auto phases = stats::compute_phase_stats(dataset, assignment, stats::FramePredicate::accept_all(dataset));
  const auto sizes = stats::compute_set_sizes(dataset, assignment);
  const double all_frames = static_cast<double>(dataset.total_frames());

  double divergence = 0.0;
  for (auto s : active) {
    const auto frames = static_cast<double>(sizes.frame_count[set_slot(s)]);
    double tv = 0.0;
    for (const auto& row : phases.frame_count) {
      const double overall = static_cast<double>(row[0] + row[1] + row[2]) / all_frames;
      tv += std::abs((frames > 0 ? static_cast<double>(row[set_slot(s)]) / frames : 0.0) - overall);
    }
    divergence += frames > 0 ? 0.5 * tv : 1.0;
  }
  total += objective.divergence_weight * divergence / static_cast<double>(active.size());

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (auto s : active) {
    const double mean = sizes.mean_frames[set_slot(s)].value_or(0.0);
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  const double overall_mean = all_frames / static_cast<double>(dataset.surgery_count());
  total += objective.disparity_weight * (hi - lo) / overall_mean;
  return total;
}

SwapEvaluator::SwapEvaluator(const Dataset& dataset, const coverage::EntityTable& table, const Objective& objective,
                             std::vector<SetLabel> labels, bool has_validation)
    : table_(&table),
      objective_(objective),
      labels_(std::move(labels)),
      active_(active_sets(has_validation)),
      phase_count_(dataset.phase_count()) {
  const auto n = dataset.surgery_count();
  surgery_phase_frames_.assign(n, std::vector<std::int64_t>(phase_count_, 0));
  surgery_frames_.assign(n, 0);
  std::vector<std::int64_t> overall(phase_count_, 0);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& f : dataset.surgeries()[s].frames()) {
      ++surgery_phase_frames_[s][f.phase];
      ++overall[f.phase];
    }
    surgery_frames_[s] = static_cast<std::int64_t>(dataset.surgeries()[s].frame_count());
  }
  const auto all_frames = static_cast<double>(dataset.total_frames());
  for (auto c : overall) overall_distribution_.push_back(static_cast<double>(c) / all_frames);
  overall_mean_frames_ = all_frames / static_cast<double>(n);

  entity_counts_.assign(table_->entities.size(), PerSet{});
  for (auto& v : set_phase_frames_) v.assign(phase_count_, 0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto slot = set_slot(labels_[s]);
    for (const auto& [e, count] : table_->signatures[s]) entity_counts_[e][slot] += count;
    for (std::size_t p = 0; p < phase_count_; ++p) set_phase_frames_[slot][p] += surgery_phase_frames_[s][p];
    terms_.frames[slot] += surgery_frames_[s];
    ++terms_.surgeries[slot];
  }
  for (std::size_t e = 0; e < entity_counts_.size(); ++e) {
    const auto cat = coverage::category_slot(table_->entities[e].category);
    for (auto s : active_) {
      if (entity_counts_[e][set_slot(s)] == 0) ++terms_.unrepresented[cat][set_slot(s)];
    }
  }
  for (auto s : active_) {
    terms_.divergence[set_slot(s)] = set_divergence(set_phase_frames_[set_slot(s)], terms_.frames[set_slot(s)]);
  }
  score_ = combine(terms_);
}

double SwapEvaluator::set_divergence(const std::vector<std::int64_t>& phase_frames, std::int64_t frames) const {
  return total_variation(phase_frames, frames, overall_distribution_);
}

double SwapEvaluator::combine(const Terms& t) const {
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    for (auto s : active_) {
      total += objective_.category_weights[c][set_slot(s)] * static_cast<double>(t.unrepresented[c][set_slot(s)]);
    }
  }
  double divergence = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (auto s : active_) {
    divergence += t.divergence[set_slot(s)];
    const auto surgeries = t.surgeries[set_slot(s)];
    const double mean =
        surgeries > 0 ? static_cast<double>(t.frames[set_slot(s)]) / static_cast<double>(surgeries) : 0.0;
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  total += objective_.divergence_weight * divergence / static_cast<double>(active_.size());
  total += objective_.disparity_weight * (hi - lo) / overall_mean_frames_;
  return total;
}

SwapEvaluator::Terms SwapEvaluator::swapped_terms(std::size_t a, std::size_t b, std::vector<std::int64_t>* phase_a,
                                                  std::vector<std::int64_t>* phase_b) const {
  Terms t = terms_;
  const auto sa = set_slot(labels_[a]);
  const auto sb = set_slot(labels_[b]);
  if (sa == sb) return t;

  const auto& sig_a = table_->signatures[a];
  const auto& sig_b = table_->signatures[b];
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sig_a.size() || j < sig_b.size()) {
    coverage::EntityIndex e = 0;
    std::int64_t ca = 0;
    std::int64_t cb = 0;
    if (j >= sig_b.size() || (i < sig_a.size() && sig_a[i].first < sig_b[j].first)) {
      e = sig_a[i].first;
      ca = sig_a[i++].second;
    } else if (i >= sig_a.size() || sig_b[j].first < sig_a[i].first) {
      e = sig_b[j].first;
      cb = sig_b[j++].second;
    } else {
      e = sig_a[i].first;
      ca = sig_a[i++].second;
      cb = sig_b[j++].second;
    }
    const auto cat = coverage::category_slot(table_->entities[e].category);
    const auto old_a = entity_counts_[e][sa];
    const auto old_b = entity_counts_[e][sb];
    const auto new_a = old_a - ca + cb;
    const auto new_b = old_b - cb + ca;
    t.unrepresented[cat][sa] += static_cast<std::int64_t>(new_a == 0) - static_cast<std::int64_t>(old_a == 0);
    t.unrepresented[cat][sb] += static_cast<std::int64_t>(new_b == 0) - static_cast<std::int64_t>(old_b == 0);
  }

  const auto delta = surgery_frames_[b] - surgery_frames_[a];
  t.frames[sa] += delta;
  t.frames[sb] -= delta;

  std::vector<std::int64_t> local_a;
  std::vector<std::int64_t> local_b;
  auto& pa = phase_a != nullptr ? *phase_a : local_a;
  auto& pb = phase_b != nullptr ? *phase_b : local_b;
  pa = set_phase_frames_[sa];
  pb = set_phase_frames_[sb];
  for (std::size_t p = 0; p < phase_count_; ++p) {
    const auto d = surgery_phase_frames_[b][p] - surgery_phase_frames_[a][p];
    pa[p] += d;
    pb[p] -= d;
  }
  t.divergence[sa] = set_divergence(pa, t.frames[sa]);
  t.divergence[sb] = set_divergence(pb, t.frames[sb]);
  return t;
}

double SwapEvaluator::score_after_swap(std::size_t a, std::size_t b) const {
  return combine(swapped_terms(a, b, nullptr, nullptr));
}

void SwapEvaluator::apply_swap(std::size_t a, std::size_t b) {
  const auto sa = set_slot(labels_[a]);
  const auto sb = set_slot(labels_[b]);
  if (sa == sb) return;
  std::vector<std::int64_t> pa;
  std::vector<std::int64_t> pb;
  terms_ = swapped_terms(a, b, &pa, &pb);
  set_phase_frames_[sa] = std::move(pa);
  set_phase_frames_[sb] = std::move(pb);
  for (const auto& [e, count] : table_->signatures[a]) {
    entity_counts_[e][sa] -= count;
    entity_counts_[e][sb] += count;
  }
  for (const auto& [e, count] : table_->signatures[b]) {
    entity_counts_[e][sb] -= count;
    entity_counts_[e][sa] += count;
  }
  std::swap(labels_[a], labels_[b]);
  score_ = combine(terms_);
}

namespace {

struct ChainResult {
  std::vector<SetLabel> best_labels;
  double best = std::numeric_limits<double>::infinity();
  double initial = 0.0;
  std::vector<TracePoint> trace;
  std::int64_t used = 0;
};

std::vector<SetLabel> random_labels(std::size_t n, const PerSet& sizes, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<SetLabel> labels(n, SetLabel::Train);
  std::size_t k = 0;
  for (auto set : kAllSets) {
    for (std::int64_t c = 0; c < sizes[set_slot(set)]; ++c) labels[order[k++]] = set;
  }
  return labels;
}

struct ChainInput {
  const Dataset& dataset;
  const coverage::EntityTable& table;
  const Objective& objective;
  const SearchConfig& config;
  const std::vector<std::string>& ids;
  std::int64_t neighbourhood;
};

ChainResult run_chain(const ChainInput& in, std::optional<std::vector<SetLabel>> start, std::int64_t budget,
                      std::int64_t offset, std::uint64_t chain, std::atomic<std::int64_t>* progress) {
  std::seed_seq seq{static_cast<std::uint32_t>(in.config.seed), static_cast<std::uint32_t>(in.config.seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  std::mt19937_64 rng(seq);
  const auto n = in.dataset.surgery_count();
  const bool has_val = in.config.has_validation();

  ChainResult out;
  if (budget <= 0) return out;

  auto count_evaluation = [&] {
    ++out.used;
    if (progress != nullptr) progress->fetch_add(1, std::memory_order_relaxed);
  };

  SwapEvaluator ev(in.dataset, in.table, in.objective,
                   start ? std::move(*start) : random_labels(n, in.config.sizes, rng), has_val);
  count_evaluation();
  double current = ev.score();
  out.initial = current;
  out.best = current;
  out.best_labels = ev.labels();
  out.trace.push_back({offset + out.used, current});

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::int64_t failed = 0;
  while (out.used < budget && out.best > kImprovementEpsilon && in.neighbourhood > 0) {
    std::optional<std::pair<std::size_t, std::size_t>> chosen;
    double chosen_score = 0.0;
    std::pair<std::string_view, std::string_view> chosen_key;
    std::int64_t sampled = 0;
    for (int k = 0; k < in.config.sample_size && out.used < budget; ++k) {
      const auto a = pick(rng);
      auto b = pick(rng);
      while (ev.labels()[b] == ev.labels()[a]) b = pick(rng);
      const double sc = ev.score_after_swap(a, b);
      count_evaluation();
      ++sampled;
      std::pair<std::string_view, std::string_view> key = std::minmax(std::string_view(in.ids[a]), std::string_view(in.ids[b]));
      if (!chosen || sc < chosen_score || (sc == chosen_score && key < chosen_key)) {
        chosen = {a, b};
        chosen_score = sc;
        chosen_key = key;
      }
    }
    if (chosen && chosen_score < current - kImprovementEpsilon) {
      ev.apply_swap(chosen->first, chosen->second);
      current = ev.score();
      failed = 0;
    } else {
      failed += sampled;
      if (failed < in.neighbourhood || out.used >= budget) continue;
      // Local optimum: restart from a fresh random split.
      ev = SwapEvaluator(in.dataset, in.table, in.objective, random_labels(n, in.config.sizes, rng), has_val);
      count_evaluation();
      current = ev.score();
      failed = 0;
    }
    if (current < out.best - kImprovementEpsilon) {
      out.best = current;
      out.best_labels = ev.labels();
      out.trace.push_back({offset + out.used, current});
    }
  }
  return out;
}

}  // namespace

Result optimize(const Dataset& dataset, const SearchConfig& config, const Objective& objective,
                const std::optional<SplitAssignment>& initial, std::atomic<std::int64_t>* progress) {
  objective.validate();
  if (config.budget < 1) throw OptimizeError("evaluation budget must be at least 1");
  if (config.restarts < 1) throw OptimizeError("restarts must be at least 1");
  if (config.sample_size < 1) throw OptimizeError("sample size must be at least 1");
  std::int64_t total = 0;
  for (auto s : config.sizes) {
    if (s < 0) throw OptimizeError("set sizes must be non-negative");
    total += s;
  }
  if (total != static_cast<std::int64_t>(dataset.surgery_count())) {
    throw OptimizeError("set sizes sum to " + std::to_string(total) + " but the dataset has " +
                        std::to_string(dataset.surgery_count()) + " surgeries");
  }
  if (config.sizes[set_slot(SetLabel::Train)] == 0 || config.sizes[set_slot(SetLabel::Test)] == 0) {
    throw OptimizeError("train and test sets must be non-empty");
  }

  std::optional<std::vector<SetLabel>> start;
  if (initial) {
    if (auto v = validate(*initial, dataset); !v.empty()) {
      throw OptimizeError("invalid initial assignment: " + v.front().code + " (" + v.front().detail + ")");
    }
    if (initial->has_validation() != config.has_validation()) {
      throw OptimizeError("initial assignment does not match the configured validation set");
    }
    start = labels_by_index(dataset, *initial);
    PerSet sizes{};
    for (auto l : *start) ++sizes[set_slot(l)];
    if (sizes != config.sizes) throw OptimizeError("initial assignment does not match the configured set sizes");
  }

  const auto table = coverage::build_entity_table(dataset, config.coverage);
  std::vector<std::string> ids;
  for (const auto& s : dataset.surgeries()) ids.push_back(s.id());
  std::int64_t neighbourhood = 0;
  for (std::size_t x = 0; x < kSetCount; ++x) {
    for (std::size_t y = x + 1; y < kSetCount; ++y) neighbourhood += config.sizes[x] * config.sizes[y];
  }
  const ChainInput input{dataset, table, objective, config, ids, neighbourhood};

  const auto chains = static_cast<std::int64_t>(std::min<std::int64_t>(config.restarts, config.budget));
  std::vector<std::int64_t> budgets(static_cast<std::size_t>(chains), config.budget / chains);
  for (std::int64_t c = 0; c < config.budget % chains; ++c) ++budgets[static_cast<std::size_t>(c)];
  std::vector<std::int64_t> offsets(budgets.size(), 0);
  for (std::size_t c = 1; c < budgets.size(); ++c) offsets[c] = offsets[c - 1] + budgets[c - 1];

  std::vector<ChainResult> results(budgets.size());
#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t c = 0; c < chains; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    results[idx] = run_chain(input, c == 0 ? start : std::nullopt, budgets[idx], offsets[idx],
                             static_cast<std::uint64_t>(c), progress);
  }

  // Chains are merged in index order, so ties go to the lowest chain and the
  // global trace keeps only points that beat everything before them.
  Result out;
  out.initial_score = results.front().initial;
  out.score = std::numeric_limits<double>::infinity();
  const std::vector<SetLabel>* best = nullptr;
  for (const auto& r : results) {
    out.evaluations += r.used;
    bool improved = false;
    for (const auto& point : r.trace) {
      if (out.trace.empty() || point.score < out.score - kImprovementEpsilon) {
        out.trace.push_back(point);
        out.score = point.score;
        improved = true;
      }
    }
    if (improved) best = &r.best_labels;
  }

  std::map<std::string, SetLabel> labels;
  for (std::size_t s = 0; s < ids.size(); ++s) labels.emplace(ids[s], (*best)[s]);
  out.assignment = SplitAssignment(std::move(labels), config.has_validation());
  return out;
}

}  // namespace splitaudit::optimize
