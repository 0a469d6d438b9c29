#include "udil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "udil/errors.hpp"

namespace udil {

AccuracyMatrix::AccuracyMatrix(int T) : T_(T) {
  if (T < 1) throw ContractError("AccuracyMatrix: T must be >= 1");
  cells_.resize(static_cast<std::size_t>(T) * static_cast<std::size_t>(T));
}

AccuracyMatrix AccuracyMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix R(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw ContractError("AccuracyMatrix: rows must be square");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (!std::isnan(rows[i][j])) R.set(static_cast<int>(i) + 1, static_cast<int>(j) + 1, rows[i][j]);
    }
  }
  return R;
}

void AccuracyMatrix::set(int i, int j, double acc) {
  if (i < 1 || j < 1 || i > T_ || j > T_ || j > i + 1) {
    throw ContractError("AccuracyMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
  }
  if (!(acc >= 0.0 && acc <= 1.0)) throw ContractError("AccuracyMatrix: accuracy outside [0,1]");
  cells_[static_cast<std::size_t>((i - 1) * T_ + (j - 1))] = acc;
}

bool AccuracyMatrix::has(int i, int j) const {
  if (i < 1 || j < 1 || i > T_ || j > T_) return false;
  return cells_[static_cast<std::size_t>((i - 1) * T_ + (j - 1))].has_value();
}

double AccuracyMatrix::at(int i, int j) const {
  if (!has(i, j)) {
    throw ContractError("AccuracyMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) + ") not populated");
  }
  return *cells_[static_cast<std::size_t>((i - 1) * T_ + (j - 1))];
}

std::vector<std::vector<double>> AccuracyMatrix::rows() const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(T_),
                                       std::vector<double>(static_cast<std::size_t>(T_),
                                                           std::numeric_limits<double>::quiet_NaN()));
  for (int i = 1; i <= T_; ++i) {
    for (int j = 1; j <= T_; ++j) {
      if (has(i, j)) out[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = at(i, j);
    }
  }
  return out;
}

double avg_acc(const AccuracyMatrix& R, int t) {
  if (t < 1 || t > R.size()) throw ContractError("avg_acc: t out of range");
  double s = 0.0;
  for (int i = 1; i <= t; ++i) s += R.at(t, i);
  return s / t;
}

double avg_of_avg(const AccuracyMatrix& R, int t1, int t2) {
  if (t1 < 1 || t2 < t1 || t2 > R.size()) throw ContractError("avg_of_avg: invalid range");
  double s = 0.0;
  for (int t = t1; t <= t2; ++t) s += avg_acc(R, t);
  return s / (t2 - t1 + 1);
}

double forgetting_of(const AccuracyMatrix& R, int t, int j) {
  if (t < 2) throw ContractError("forgetting: undefined for t = 1");
  if (j < 1 || j >= t) throw ContractError("forgetting: column must precede t");
  double best = -std::numeric_limits<double>::infinity();
  for (int l = j; l < t; ++l) best = std::max(best, R.at(l, j) - R.at(t, j));
  return best;
}

double forgetting(const AccuracyMatrix& R, int t) {
  if (t < 2) throw ContractError("forgetting: undefined for t = 1");
  if (t > R.size()) throw ContractError("forgetting: t out of range");
  double s = 0.0;
  for (int j = 1; j < t; ++j) s += forgetting_of(R, t, j);
  return s / (t - 1);
}

double forward_transfer(const AccuracyMatrix& R, const std::vector<double>& r_baseline, int t) {
  if (t < 2) throw ContractError("forward_transfer: undefined for t = 1");
  if (t > R.size()) throw ContractError("forward_transfer: t out of range");
  if (r_baseline.size() < static_cast<std::size_t>(t)) throw ContractError("forward_transfer: missing baseline");
  double s = 0.0;
  for (int i = 2; i <= t; ++i) {
    if (!R.has(i - 1, i)) {
      throw ContractError("forward_transfer: superdiagonal entry (" + std::to_string(i - 1) + "," +
                          std::to_string(i) + ") not measured");
    }
    s += R.at(i - 1, i) - r_baseline[static_cast<std::size_t>(i - 1)];
  }
  return s / (t - 1);
}

}  // namespace udil
