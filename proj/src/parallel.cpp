#include "kubo/parallel.hpp"
#include "kubo/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace kubo {

namespace {
std::atomic<unsigned> g_jobs{0};
}

std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoFermiPoint: return "NoFermiPoint";
    case ErrorCode::BandEdge: return "BandEdge";
    case ErrorCode::DegenerateCrossing: return "DegenerateCrossing";
    case ErrorCode::ElasticScatteringViolated: return "ElasticScatteringViolated";
    case ErrorCode::EigenSolverFailure: return "EigenSolverFailure";
    case ErrorCode::SingularPropagator: return "SingularPropagator";
    case ErrorCode::CutoffTooLow: return "CutoffTooLow";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::EtaNotMatsubara: return "EtaNotMatsubara";
    case ErrorCode::CoincidentTimes: return "CoincidentTimes";
    case ErrorCode::StepControlFailure: return "StepControlFailure";
    case ErrorCode::NearSingularT: return "NearSingularT";
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ModelFileMissing: return "ModelFileMissing";
    case ErrorCode::CheckFailed: return "CheckFailed";
  }
  return "Unknown";
}

void set_default_jobs(unsigned jobs) { g_jobs = jobs; }

unsigned default_jobs() {
  const unsigned j = g_jobs.load();
  if (j > 0) return j;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned jobs) {
  if (jobs == 0) jobs = default_jobs();
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace kubo
