#pragma once

#include <functional>
#include <vector>

#include "kubo/types.hpp"

namespace kubo {

/// out = (ca·A(ta) + cb·A(tb)) X for the interaction-picture generator A.
using GeneratorPair = std::function<void(double ta, double ca, double tb, double cb, const CMat& X, CMat& out)>;

struct MagnusOptions {
  double tol = 1e-12;      // max-norm local error per step (step doubling)
  double initial_step = 0.1;
  double min_step = 1e-9;
  double max_step = 1e9;
  long max_steps = 10'000'000;
  /// If nonempty, the step-doubling error is estimated on these columns only and the accepted
  /// step is then applied once to all columns.
  std::vector<Eigen::Index> probe;
};

struct MagnusStats {
  long accepted = 0;
  long rejected = 0;
  double max_local_error = 0.0;
};

/// Solves i dU/dt = A(t) U from t0 to t1 with the two-exponential commutator-free 4th-order Magnus
/// scheme; each exponential is applied to the columns of U by a Taylor series. Throws
/// StepControlFailure if the step size underflows or the step budget is exhausted.
CMat magnus_cf4(const GeneratorPair& A, CMat U, double t0, double t1, const MagnusOptions& opt,
                MagnusStats* stats = nullptr);

/// max |(U†U - 1)_{ij}|.
double unitarity_defect(const CMat& U);

}  // namespace kubo
