#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "elmfit/features.hpp"

namespace elmfit {

enum class SolverMode { automatic, normal, orthogonal, svd };

SolverMode solver_mode_from_string(const std::string& s);
const char* solver_mode_name(SolverMode m);

struct SolveResult {
    std::vector<double> alpha;  // column-major: channel c occupies [c*m, (c+1)*m)
    std::size_t m = 0;
    std::size_t channels = 0;
    double ridge_used = 0.0;
    std::vector<double> residual_rms;  // per channel, training residual
    const char* path = "";             // "llt", "cod" or "svd"
};

// Minimizes ||H a - Y||_F^2 + ridge ||a||_F^2 for all channels against one
// factorization. ridge = nullopt selects the relative floor
// 1e-13 * trace(H^T H) / m (heavier floors visibly regularize the
// interpolation regime m ~ S); an explicit 0 selects the minimum-norm
// least-squares solution. H is S x m row-major, Y is S x C row-major.
SolveResult solve_local(const double* H, std::size_t S, std::size_t m, const double* Y,
                        std::size_t C, std::optional<double> ridge = std::nullopt,
                        SolverMode mode = SolverMode::automatic);

// In-place lower Cholesky of the row-major symmetric matrix G; only the
// lower triangle is referenced/written. Returns false on a non-positive
// pivot. Blocked; the trailing update runs on the dispatched syrk kernel.
bool llt_factor_lower(double* G, std::size_t m);
// Solves L L^T x = b for C column-major right-hand sides, in place.
void llt_solve_lower(const double* L, std::size_t m, double* B, std::size_t C);

// One region's fitted predictor.
struct LocalModel {
    std::int64_t region_id = -1;
    HiddenLayer hidden;
    CoordMap cmap;
    bool bias_column = true;
    std::vector<double> alpha;  // (m [+1]) x C column-major; bias weight last
    double ridge_used = 0.0;
    std::vector<double> residual_rms;
    std::size_t alpha_rows = 0;
    std::size_t channels = 0;
};

// out (S x C row-major) = activations(coords) * alpha. coords are
// normalized by the model's coordinate map beforehand.
void predict_local(const LocalModel& model, const RffEncoder* enc, const double* coords,
                   std::size_t S, int d, double* out);

}  // namespace elmfit
