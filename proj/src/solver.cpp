#include "elmfit/solver.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <limits>

#include "elmfit/kernels.hpp"

namespace elmfit {

SolverMode solver_mode_from_string(const std::string& s) {
    if (s == "auto") return SolverMode::automatic;
    if (s == "normal") return SolverMode::normal;
    if (s == "orthogonal") return SolverMode::orthogonal;
    if (s == "svd") return SolverMode::svd;
    fail_usage("unknown solver_mode: " + s);
}

const char* solver_mode_name(SolverMode m) {
    switch (m) {
        case SolverMode::automatic: return "auto";
        case SolverMode::normal: return "normal";
        case SolverMode::orthogonal: return "orthogonal";
        case SolverMode::svd: return "svd";
    }
    return "?";
}

bool llt_factor_lower(double* G, std::size_t m) {
    constexpr std::size_t nb = 128;
    for (std::size_t k0 = 0; k0 < m; k0 += nb) {
        const std::size_t kb = std::min(nb, m - k0);
        // unblocked factorization of the diagonal block
        for (std::size_t j = 0; j < kb; ++j) {
            double* rowj = G + (k0 + j) * m + k0;
            const double d = rowj[j] - kern::sumsq(rowj, j);
            if (!(d > 0.0) || !std::isfinite(d)) return false;
            const double ljj = std::sqrt(d);
            rowj[j] = ljj;
            const double inv = 1.0 / ljj;
            for (std::size_t i = j + 1; i < kb; ++i) {
                double* rowi = G + (k0 + i) * m + k0;
                rowi[j] = (rowi[j] - kern::dot(rowi, rowj, j)) * inv;
            }
        }
        const std::size_t r0 = k0 + kb;
        if (r0 >= m) break;
        // panel solve: rows below the block against the block's transpose
        for (std::size_t r = r0; r < m; ++r) {
            double* x = G + r * m + k0;
            for (std::size_t j = 0; j < kb; ++j) {
                const double* rowj = G + (k0 + j) * m + k0;
                x[j] = (x[j] - kern::dot(x, rowj, j)) / rowj[j];
            }
        }
        // trailing update: G22 -= panel panel^T (lower triangle)
        kern::syrk_lower_accum(G + r0 * m + r0, m, G + r0 * m + k0, m, m - r0, kb, -1.0);
    }
    return true;
}

void llt_solve_lower(const double* L, std::size_t m, double* B, std::size_t C) {
    for (std::size_t c = 0; c < C; ++c) {
        double* x = B + c * m;
        for (std::size_t i = 0; i < m; ++i)
            x[i] = (x[i] - kern::dot(L + i * m, x, i)) / L[i * m + i];
        for (std::size_t i = m; i-- > 0;) {
            x[i] /= L[i * m + i];
            kern::axpy(-x[i], L + i * m, x, i);
        }
    }
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void cod_minnorm(const double* H, std::size_t S, std::size_t m, const double* Y, std::size_t C,
                 double ridge, double* X) {
    Eigen::Map<const RowMajor> Hm(H, static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(m));
    Eigen::Map<const RowMajor> Ym(Y, static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(C));
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    if (ridge > 0.0) {
        A.setZero(static_cast<Eigen::Index>(S + m), static_cast<Eigen::Index>(m));
        A.topRows(static_cast<Eigen::Index>(S)) = Hm;
        A.bottomRows(static_cast<Eigen::Index>(m)) =
            std::sqrt(ridge) * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m),
                                                         static_cast<Eigen::Index>(m));
        B.setZero(static_cast<Eigen::Index>(S + m), static_cast<Eigen::Index>(C));
        B.topRows(static_cast<Eigen::Index>(S)) = Ym;
    } else {
        A = Hm;
        B = Ym;
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    Eigen::MatrixXd sol = cod.solve(B);
    Eigen::Map<Eigen::MatrixXd>(X, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(C)) =
        sol;
}

void svd_solve(const double* H, std::size_t S, std::size_t m, const double* Y, std::size_t C,
               double ridge, double* X) {
    Eigen::Map<const RowMajor> Hm(H, static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(m));
    Eigen::Map<const RowMajor> Ym(Y, static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(C));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Hm, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd filt(sv.size());
    if (ridge > 0.0) {
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            filt[i] = sv[i] / (sv[i] * sv[i] + ridge);
    } else {
        const double tol = static_cast<double>(std::max(S, m)) *
                           std::numeric_limits<double>::epsilon() * (sv.size() ? sv[0] : 0.0);
        for (Eigen::Index i = 0; i < sv.size(); ++i) filt[i] = sv[i] > tol ? 1.0 / sv[i] : 0.0;
    }
    Eigen::MatrixXd sol = svd.matrixV() * filt.asDiagonal() * (svd.matrixU().transpose() * Ym);
    Eigen::Map<Eigen::MatrixXd>(X, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(C)) =
        sol;
}

bool try_normal(const double* H, std::size_t S, std::size_t m, const double* Y, std::size_t C,
                double ridge, double* X) {
    std::vector<double> G(m * m);
    kern::gram(H, S, m, G.data());
    for (std::size_t i = 0; i < m; ++i) G[i * m + i] += ridge;
    if (!llt_factor_lower(G.data(), m)) return false;
    kern::at_b(H, Y, S, m, C, X);
    llt_solve_lower(G.data(), m, X, C);
    return true;
}

}  // namespace

SolveResult solve_local(const double* H, std::size_t S, std::size_t m, const double* Y,
                        std::size_t C, std::optional<double> ridge, SolverMode mode) {
    if (S < 1 || m < 1 || C < 1) fail_usage("solve_local: empty system");
    const double trace_g = kern::sumsq(H, S * m);  // trace(H^T H)
    const double ynorm = kern::sumsq(Y, S * C);
    if (!std::isfinite(trace_g) || !std::isfinite(ynorm))
        fail_numeric("solve_local: non-finite inputs");
    if (ridge && (*ridge < 0.0 || !std::isfinite(*ridge)))
        fail_usage("ridge must be finite and >= 0");

    const double ridge_eff = ridge ? *ridge : 1e-13 * trace_g / static_cast<double>(m);

    SolveResult res;
    res.m = m;
    res.channels = C;
    res.alpha.assign(m * C, 0.0);
    res.ridge_used = ridge_eff;

    bool solved = false;
    if (mode == SolverMode::normal || (mode == SolverMode::automatic && ridge_eff > 0.0)) {
        double r = ridge_eff;
        for (int attempt = 0; attempt < 3 && !solved; ++attempt) {
            if (attempt > 0) {
                r = (r > 0.0) ? 100.0 * r : 1e-12 * trace_g / static_cast<double>(m);
                if (r == 0.0) r = 1e-300;
            }
            if (try_normal(H, S, m, Y, C, r, res.alpha.data())) {
                res.ridge_used = r;
                res.path = "llt";
                solved = true;
            }
        }
        if (!solved && mode == SolverMode::normal)
            fail_numeric("solve_local: factorization failure after ridge escalation");
    }
    if (!solved) {
        if (mode == SolverMode::svd) {
            svd_solve(H, S, m, Y, C, ridge_eff, res.alpha.data());
            res.path = "svd";
        } else {
            cod_minnorm(H, S, m, Y, C, ridge_eff, res.alpha.data());
            res.path = "cod";
        }
        res.ridge_used = ridge_eff;
    }

    // per-channel training residual
    res.residual_rms.assign(C, 0.0);
    std::vector<double> pred(S * C);
    kern::a_x(H, res.alpha.data(), S, m, C, pred.data());
    for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const double e = pred[s * C + c] - Y[s * C + c];
            acc += e * e;
        }
        res.residual_rms[c] = std::sqrt(acc / static_cast<double>(S));
    }
    for (double v : res.alpha)
        if (!std::isfinite(v)) fail_numeric("solve_local: non-finite solution");
    return res;
}

void predict_local(const LocalModel& model, const RffEncoder* enc, const double* coords,
                   std::size_t S, int d, double* out) {
    const std::size_t cols = model.alpha_rows;
    const std::size_t chunk = 512;
    std::vector<double> H(std::min(chunk, S) * cols);
    for (std::size_t s0 = 0; s0 < S; s0 += chunk) {
        const std::size_t len = std::min(chunk, S - s0);
        hidden_activations(model.hidden, enc, coords + s0 * static_cast<std::size_t>(d), len, d,
                           H.data(), cols);
        if (model.bias_column)
            for (std::size_t s = 0; s < len; ++s) H[s * cols + cols - 1] = 1.0;
        kern::a_x(H.data(), model.alpha.data(), len, cols, model.channels,
                  out + s0 * model.channels);
    }
}

}  // namespace elmfit
