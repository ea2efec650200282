#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace cfse {

struct Estimate {
  double mean = 0;
  double std_error = 0;
};

// Weighted mean sum w f / sum w with a leave-one-out jackknife error.
Estimate jackknife_mean(const std::vector<double>& values, const std::vector<double>& weights);

// Jackknife for a general statistic of the sample set. stat(skip) must return
// the statistic with sample `skip` removed, or with nothing removed when
// skip == count.
Estimate jackknife(std::size_t count, const std::function<double(std::size_t skip)>& stat);

struct LogMeanExp {
  double value = 0;     // log(sum w e^x / sum w)
  double mc_error = 0;  // jackknife error of the mean, relative (delta method)
  double shift = 0;     // max x
};

// Evaluated as shift + log1p(mean(expm1(x - shift))). Errors: OverflowGuard,
// EnsembleEmpty.
LogMeanExp log_mean_exp(const std::vector<double>& x, const std::vector<double>& weights);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

// Worker count used by internal loops; 1 unless configured.
int worker_threads();
void set_worker_threads(int k);

// Runs fn(i) for i in [0, count). Each index must write only its own output
// slot; results then do not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace cfse
