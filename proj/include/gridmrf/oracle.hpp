#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "gridmrf/grid_model.hpp"

namespace gridmrf {

// Exhaustive-computation helpers for validating the samplers on small models.
// Everything here is exponential in the node count and guarded by the caps
// below; it exists for verification, not for production inference.

inline constexpr std::size_t kMaxEnumerationStates = 20'000'000;
inline constexpr std::size_t kMaxKernelStates = 4096;
inline constexpr std::size_t kMaxStageKernelStates = 1024;

struct EnumeratedJoint {
    int n_nodes = 0;
    int n_states = 0;
    std::vector<double> log_weight;  // unnormalized log mass per joint state
    std::vector<double> pi;          // normalized probabilities
    double log_z = 0.0;
};

// Joint states are indexed mixed-radix with node 0 most significant.
std::size_t joint_state_count(const GridMrf& mrf);
std::size_t joint_index(const GridMrf& mrf, std::span<const int> x);
void decode_joint(const GridMrf& mrf, std::size_t index, std::span<int> out);

EnumeratedJoint enumerate_joint(const GridMrf& mrf);

// Row-major [node][label] exact single-node marginals.
std::vector<double> exact_marginals(const GridMrf& mrf, const EnumeratedJoint& joint);

Eigen::VectorXd stationary_vector(const EnumeratedJoint& joint);

// One full update of the two-block scheme as a row-stochastic matrix:
// resample side1 given side2, then side2 given the fresh side1.  The
// intermediate sum collapses analytically, so this equals the product of the
// two stage matrices below.
Eigen::MatrixXd build_da_kernel(const GridMrf& mrf, const EnumeratedJoint& joint,
                                const Partition& partition);
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_da_stage_kernels(const GridMrf& mrf,
                                                                   const EnumeratedJoint& joint,
                                                                   const Partition& partition);

// One raster-order single-site sweep as a row-stochastic matrix.
Eigen::MatrixXd build_gibbs_kernel(const GridMrf& mrf, const EnumeratedJoint& joint);

// l1 norm of pi^T K - pi^T; zero iff pi is stationary for K.
double stationary_residual(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi);

// Spectral norm of the kernel restricted to the space of mean-zero
// square-integrable functions under pi: sigma_max(P S P) with
// S = D^{1/2} K D^{-1/2}, D = diag(pi), P = I - sqrt(pi) sqrt(pi)^T.
// Bounds the per-step geometric contraction of chi-square/TV gaps.
double forward_operator_norm(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi);

struct BlockJoint {
    Eigen::MatrixXd p;  // p(a, b): side1 config a, side2 config b
};
BlockJoint build_block_joint(const GridMrf& mrf, const EnumeratedJoint& joint,
                             const Partition& partition);

// Second singular value of p(a,b) / sqrt(p1(a) p2(b)); the first is always 1.
double block_maximal_correlation(const BlockJoint& bj);
double block_mutual_information(const BlockJoint& bj);

double entropy(std::span<const double> p);
double joint_entropy(const EnumeratedJoint& joint);

// H = -sum_x pi(x) sum_y K(x,y) log K(x,y), the expected one-step entropy.
double step_conditional_entropy(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi);

// Var_pi( E[h(X) | X restricted to conditioning_nodes] ), by enumeration.
double var_conditional_expectation(const GridMrf& mrf, const EnumeratedJoint& joint,
                                   std::span<const int> conditioning_nodes,
                                   const std::function<double(std::span<const int>)>& h);

struct RateFit {
    std::vector<double> gaps;  // total-variation distance to pi after each step
    bool immediate = false;    // chain already within floor of pi after <3 steps
    int points_used = 0;
    double slope = 0.0;        // least-squares slope of log gaps per step
};
RateFit geometric_rate_check(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi,
                             const Eigen::VectorXd& start, int n_steps, double floor = 1e-13);

// cov(h(X_0), h(X_lag)) for the stationary chain, lags 0..max_lag.
std::vector<double> stationary_autocovariance(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi,
                                              const Eigen::VectorXd& h, int max_lag);

// Small random binary model used by the diagnostic sweeps: alternates 2x2 and
// 2x3 grids (unless dims are forced) and, in pairs, smoothing-prior and fully
// random table families.
GridMrf make_sweep_model(std::uint64_t master_seed, int index, int rows = 0, int cols = 0);
const char* sweep_family_name(int index);

}  // namespace gridmrf
