#include "cfse/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "cfse/errors.hpp"

namespace cfse {

Estimate jackknife_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.empty()) throw Error(ErrorKind::EnsembleEmpty, "no samples");
  if (values.size() != weights.size()) throw Error(ErrorKind::DimensionMismatch, "weights length");
  double sw = 0, swf = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sw += weights[i];
    swf += weights[i] * values[i];
  }
  Estimate e;
  e.mean = swf / sw;
  const std::size_t n = values.size();
  if (n < 2) return e;
  std::vector<double> loo(n);
  double avg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = (swf - weights[i] * values[i]) / (sw - weights[i]);
    avg += loo[i];
  }
  avg /= static_cast<double>(n);
  double ss = 0;
  for (double v : loo) ss += (v - avg) * (v - avg);
  e.std_error = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
  return e;
}

Estimate jackknife(std::size_t count, const std::function<double(std::size_t)>& stat) {
  if (count == 0) throw Error(ErrorKind::EnsembleEmpty, "no samples");
  Estimate e;
  e.mean = stat(count);
  if (count < 2) return e;
  std::vector<double> loo(count);
  double avg = 0;
  for (std::size_t i = 0; i < count; ++i) {
    loo[i] = stat(i);
    avg += loo[i];
  }
  avg /= static_cast<double>(count);
  double ss = 0;
  for (double v : loo) ss += (v - avg) * (v - avg);
  e.std_error = std::sqrt(ss * static_cast<double>(count - 1) / static_cast<double>(count));
  return e;
}

LogMeanExp log_mean_exp(const std::vector<double>& x, const std::vector<double>& weights) {
  if (x.empty()) throw Error(ErrorKind::EnsembleEmpty, "no samples");
  double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) throw Error(ErrorKind::OverflowGuard, "non-finite exponent");
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::expm1(x[i] - m);
  Estimate s = jackknife_mean(e, weights);
  LogMeanExp r;
  r.shift = m;
  r.value = m + std::log1p(s.mean);
  r.mc_error = s.std_error / (1.0 + s.mean);
  return r;
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "need two or more points");
  double n = static_cast<double>(x.size()), sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw Error(ErrorKind::InvalidArgument, "abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

namespace {
std::atomic<int> g_threads{1};
}

int worker_threads() { return g_threads.load(); }

void set_worker_threads(int k) { g_threads.store(std::max(1, k)); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), count);
  if (k <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < k; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cfse
