#pragma once

#include <optional>
#include <vector>

namespace udil {

// R[i][j] = test accuracy on domain j after training on domain i (1-based).
// The lower triangle (j <= i) is the main record; the superdiagonal
// R[i-1][i] holds the accuracy on domain i just before training on it.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(int T);
  // Row-major dense form; unset entries are NaN.
  static AccuracyMatrix from_rows(const std::vector<std::vector<double>>& rows);

  int size() const { return T_; }
  void set(int i, int j, double acc);  // ContractError unless 1 <= i,j <= T, j <= i + 1, acc in [0,1]
  bool has(int i, int j) const;
  double at(int i, int j) const;  // ContractError if unset
  // Dense T x T copy, NaN where unset.
  std::vector<std::vector<double>> rows() const;
  bool operator==(const AccuracyMatrix&) const = default;

 private:
  int T_ = 0;
  std::vector<std::optional<double>> cells_;
};

// A_t = mean_{i<=t} R[t][i].
double avg_acc(const AccuracyMatrix& R, int t);
// Mean of A_i for i in [t1, t2].
double avg_of_avg(const AccuracyMatrix& R, int t1, int t2);
// F_t = mean_{j<t} max_{l<t} (R[l][j] - R[t][j]). Requires t >= 2.
double forgetting(const AccuracyMatrix& R, int t);
// Single-column term f_t(j).
double forgetting_of(const AccuracyMatrix& R, int t, int j);
// W_t = mean_{i=2..t} (R[i-1][i] - r_i), with r_i = r_baseline[i-1] the
// accuracy of a freshly initialized model on domain i.
double forward_transfer(const AccuracyMatrix& R, const std::vector<double>& r_baseline, int t);

}  // namespace udil
