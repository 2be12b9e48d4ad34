#pragma once

#include <optional>
#include <vector>

namespace mdgnn {

struct DayScores {
  std::size_t day = 0;
  std::vector<double> predictions;  // y-hat per stock
  std::vector<double> returns;      // realized excess return per stock
  std::vector<char> valid;
};

// Rank (Spearman) correlation between predictions and realized excess
// returns over valid stocks; nullopt when fewer than 2 valid stocks or
// either vector is constant (undefined correlation).
std::optional<double> daily_ic(const DayScores& s);

// K highest-prediction valid stocks, ties broken by lower index. Empty when
// fewer than K stocks are valid (day skipped).
std::vector<std::size_t> topk_portfolio(const DayScores& s, std::size_t k);

// Equal-weight mean excess return of the given stocks.
double portfolio_return(const DayScores& s, const std::vector<std::size_t>& members);

// Compounded: prod(1 + r_d) - 1.
double cumulative_return(const std::vector<double>& daily_returns);

// mean / sample stdev, no annualization; nullopt on zero tracking error or
// fewer than 2 days.
std::optional<double> information_ratio(const std::vector<double>& daily_returns);

// Fraction of the top-K with positive excess return; nullopt when the day is
// skipped for lack of valid stocks.
std::optional<double> precision_at_k(const DayScores& s, std::size_t k);

struct DayMetrics {
  std::size_t day = 0;
  std::optional<double> ic;
  std::optional<double> portfolio_ret;
  std::optional<double> precision;
  std::vector<std::size_t> top_k;
};

struct BacktestReport {
  std::vector<DayMetrics> per_day;
  double ic = 0.0;
  double ir = 0.0;
  bool ir_defined = false;
  double cr = 0.0;
  double prec_at_k = 0.0;
  std::size_t k = 0;
  std::vector<std::size_t> skipped_ic_days;    // degenerate correlation
  std::vector<std::size_t> skipped_topk_days;  // fewer than K valid stocks
};

BacktestReport evaluate_days(const std::vector<DayScores>& days, std::size_t k);

}  // namespace mdgnn
