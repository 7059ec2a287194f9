#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace micromacro {

/// Invalid configuration or parameter out of its admissible range.
/// Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Runtime numerical failure (domain violation, lost positivity, exhausted
/// retries, non-convergence). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Worker count used by data-parallel loops. The default is 1.
/// Outputs are bit-identical for any value: work is split into fixed-size
/// chunks and all reductions combine chunk partials in index order.
void set_thread_count(int n);
int thread_count();

/// Chunk size for deterministic reductions. Fixed, independent of the
/// thread count, so that partial sums always have the same boundaries.
inline constexpr std::size_t kReductionChunk = 1024;

inline std::size_t num_chunks(std::size_t n)
{
    return (n + kReductionChunk - 1) / kReductionChunk;
}

/// Runs body(chunk_index, begin, end) over [0, n) split into kReductionChunk
/// blocks, possibly on several threads. Bodies must only write to state owned
/// by their chunk index.
void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

/// Ordinary least-squares line fit y = slope*x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Fit of log(y) against log(x); used for empirical convergence orders.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Solves a tridiagonal system in place (Thomas algorithm).
/// lower has n-1 entries (row i couples to i-1), diag n, upper n-1.
std::vector<double> solve_tridiagonal(std::vector<double> lower,
                                      std::vector<double> diag,
                                      std::vector<double> upper,
                                      std::vector<double> rhs);

/// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_double(double v);

} // namespace micromacro
