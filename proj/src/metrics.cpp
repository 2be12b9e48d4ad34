#include "mdgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdgnn/errors.hpp"

namespace mdgnn {

namespace {

// average ranks (ties share the mean rank)
std::vector<double> rank_with_ties(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(const std::vector<double>& a,
                              const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

void check_shape(const DayScores& s) {
  if (s.predictions.size() != s.returns.size() ||
      s.predictions.size() != s.valid.size()) {
    throw ContractError("DayScores vectors have mismatched lengths");
  }
}

}  // namespace

std::optional<double> daily_ic(const DayScores& s) {
  check_shape(s);
  std::vector<double> p, r;
  for (std::size_t i = 0; i < s.valid.size(); ++i) {
    if (s.valid[i]) {
      p.push_back(s.predictions[i]);
      r.push_back(s.returns[i]);
    }
  }
  if (p.size() < 2) return std::nullopt;
  return pearson(rank_with_ties(p), rank_with_ties(r));
}

std::vector<std::size_t> topk_portfolio(const DayScores& s, std::size_t k) {
  check_shape(s);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < s.valid.size(); ++i) {
    if (s.valid[i]) candidates.push_back(i);
  }
  if (candidates.size() < k || k == 0) return {};
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    if (s.predictions[a] != s.predictions[b])
      return s.predictions[a] > s.predictions[b];
    return a < b;  // tie: lower index wins
  });
  candidates.resize(k);
  return candidates;
}

double portfolio_return(const DayScores& s, const std::vector<std::size_t>& members) {
  if (members.empty()) throw ContractError("empty portfolio");
  double acc = 0.0;
  for (std::size_t i : members) acc += s.returns[i];
  return acc / static_cast<double>(members.size());
}

double cumulative_return(const std::vector<double>& daily_returns) {
  double acc = 1.0;
  for (double r : daily_returns) acc *= 1.0 + r;
  return acc - 1.0;
}

std::optional<double> information_ratio(const std::vector<double>& daily_returns) {
  const std::size_t n = daily_returns.size();
  if (n < 2) return std::nullopt;
  double mean = 0.0;
  for (double r : daily_returns) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : daily_returns) ss += (r - mean) * (r - mean);
  const double stdev = std::sqrt(ss / static_cast<double>(n - 1));
  if (stdev == 0.0) return std::nullopt;
  return mean / stdev;
}

std::optional<double> precision_at_k(const DayScores& s, std::size_t k) {
  const auto top = topk_portfolio(s, k);
  if (top.empty()) return std::nullopt;
  std::size_t positive = 0;
  for (std::size_t i : top) {
    if (s.returns[i] > 0.0) ++positive;
  }
  return static_cast<double>(positive) / static_cast<double>(k);
}

BacktestReport evaluate_days(const std::vector<DayScores>& days, std::size_t k) {
  BacktestReport report;
  report.k = k;
  std::vector<double> ics, prt, precs;
  for (const auto& s : days) {
    DayMetrics dm;
    dm.day = s.day;
    dm.ic = daily_ic(s);
    if (dm.ic) {
      ics.push_back(*dm.ic);
    } else {
      report.skipped_ic_days.push_back(s.day);
    }
    dm.top_k = topk_portfolio(s, k);
    if (dm.top_k.empty()) {
      report.skipped_topk_days.push_back(s.day);
    } else {
      dm.portfolio_ret = portfolio_return(s, dm.top_k);
      dm.precision = precision_at_k(s, k);
      prt.push_back(*dm.portfolio_ret);
      precs.push_back(*dm.precision);
    }
    report.per_day.push_back(std::move(dm));
  }
  if (!ics.empty()) {
    report.ic = std::accumulate(ics.begin(), ics.end(), 0.0) / ics.size();
  }
  report.cr = cumulative_return(prt);
  const auto ir = information_ratio(prt);
  report.ir_defined = ir.has_value();
  report.ir = ir.value_or(0.0);
  if (!precs.empty()) {
    report.prec_at_k =
        std::accumulate(precs.begin(), precs.end(), 0.0) / precs.size();
  }
  return report;
}

}  // namespace mdgnn
