#include "gridmrf/oracle.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "gridmrf/common.hpp"

namespace gridmrf {

namespace {

// Odometer increment for mixed-radix enumeration: the last node is the fastest
// digit, matching joint_index (node 0 most significant).
inline void advance(std::vector<int>& x, int n_states) {
    for (int i = static_cast<int>(x.size()) - 1; i >= 0; --i) {
        if (++x[i] < n_states) return;
        x[i] = 0;
    }
}

std::size_t checked_state_count(const GridMrf& mrf, std::size_t cap, const char* what) {
    std::size_t total = 1;
    for (int i = 0; i < mrf.n_nodes(); ++i) {
        if (total > cap / static_cast<std::size_t>(mrf.n_states()))
            throw std::invalid_argument(std::string(what) + ": state space exceeds cap");
        total *= static_cast<std::size_t>(mrf.n_states());
    }
    if (total > cap) throw std::invalid_argument(std::string(what) + ": state space exceeds cap");
    return total;
}

std::size_t block_index(std::span<const int> x, std::span<const int> nodes, int n_states) {
    std::size_t idx = 0;
    for (int node : nodes) idx = idx * static_cast<std::size_t>(n_states) + static_cast<std::size_t>(x[node]);
    return idx;
}

std::size_t pow_states(int n_states, std::size_t m) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < m; ++i) r *= static_cast<std::size_t>(n_states);
    return r;
}

}  // namespace

std::size_t joint_state_count(const GridMrf& mrf) {
    return checked_state_count(mrf, kMaxEnumerationStates, "joint_state_count");
}

std::size_t joint_index(const GridMrf& mrf, std::span<const int> x) {
    if (x.size() != static_cast<std::size_t>(mrf.n_nodes()))
        throw std::invalid_argument("joint_index: assignment size mismatch");
    std::size_t idx = 0;
    for (int i = 0; i < mrf.n_nodes(); ++i) {
        if (x[i] < 0 || x[i] >= mrf.n_states())
            throw std::invalid_argument("joint_index: label out of range");
        idx = idx * static_cast<std::size_t>(mrf.n_states()) + static_cast<std::size_t>(x[i]);
    }
    return idx;
}

void decode_joint(const GridMrf& mrf, std::size_t index, std::span<int> out) {
    if (out.size() != static_cast<std::size_t>(mrf.n_nodes()))
        throw std::invalid_argument("decode_joint: output size mismatch");
    for (int i = mrf.n_nodes() - 1; i >= 0; --i) {
        out[i] = static_cast<int>(index % static_cast<std::size_t>(mrf.n_states()));
        index /= static_cast<std::size_t>(mrf.n_states());
    }
    if (index != 0) throw std::invalid_argument("decode_joint: index out of range");
}

EnumeratedJoint enumerate_joint(const GridMrf& mrf) {
    const std::size_t total = checked_state_count(mrf, kMaxEnumerationStates, "enumerate_joint");
    EnumeratedJoint ej;
    ej.n_nodes = mrf.n_nodes();
    ej.n_states = mrf.n_states();
    ej.log_weight.resize(total);
    std::vector<int> x(static_cast<std::size_t>(mrf.n_nodes()), 0);
    for (std::size_t s = 0; s < total; ++s) {
        ej.log_weight[s] = unnormalized_log_joint(mrf, x);
        advance(x, mrf.n_states());
    }
    ej.log_z = log_sum_exp(ej.log_weight);
    ej.pi.resize(total);
    for (std::size_t s = 0; s < total; ++s) ej.pi[s] = std::exp(ej.log_weight[s] - ej.log_z);
    return ej;
}

std::vector<double> exact_marginals(const GridMrf& mrf, const EnumeratedJoint& joint) {
    const int n = mrf.n_nodes();
    const int k = mrf.n_states();
    std::vector<double> marg(static_cast<std::size_t>(n) * k, 0.0);
    std::vector<int> x(static_cast<std::size_t>(n), 0);
    for (std::size_t s = 0; s < joint.pi.size(); ++s) {
        for (int i = 0; i < n; ++i) marg[static_cast<std::size_t>(i) * k + x[i]] += joint.pi[s];
        advance(x, k);
    }
    return marg;
}

Eigen::VectorXd stationary_vector(const EnumeratedJoint& joint) {
    return Eigen::Map<const Eigen::VectorXd>(joint.pi.data(),
                                             static_cast<Eigen::Index>(joint.pi.size()));
}

BlockJoint build_block_joint(const GridMrf& mrf, const EnumeratedJoint& joint,
                             const Partition& partition) {
    const std::size_t s1 = pow_states(mrf.n_states(), partition.side1.size());
    const std::size_t s2 = pow_states(mrf.n_states(), partition.side2.size());
    BlockJoint bj;
    bj.p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s1), static_cast<Eigen::Index>(s2));
    std::vector<int> x(static_cast<std::size_t>(mrf.n_nodes()), 0);
    for (std::size_t s = 0; s < joint.pi.size(); ++s) {
        const auto a = block_index(x, partition.side1, mrf.n_states());
        const auto b = block_index(x, partition.side2, mrf.n_states());
        bj.p(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += joint.pi[s];
        advance(x, mrf.n_states());
    }
    return bj;
}

Eigen::MatrixXd build_da_kernel(const GridMrf& mrf, const EnumeratedJoint& joint,
                                const Partition& partition) {
    const std::size_t total = checked_state_count(mrf, kMaxKernelStates, "build_da_kernel");
    const BlockJoint bj = build_block_joint(mrf, joint, partition);
    const Eigen::VectorXd p1 = bj.p.rowwise().sum();
    const Eigen::VectorXd p2 = bj.p.colwise().sum();

    std::vector<std::size_t> a_of(total), b_of(total);
    std::vector<int> x(static_cast<std::size_t>(mrf.n_nodes()), 0);
    for (std::size_t s = 0; s < total; ++s) {
        a_of[s] = block_index(x, partition.side1, mrf.n_states());
        b_of[s] = block_index(x, partition.side2, mrf.n_states());
        advance(x, mrf.n_states());
    }

    // K(x, y) = pi(y1 | x2) pi(y2 | y1).  Rows for starting states of zero
    // stationary mass are sent straight to pi; they are never reachable.
    Eigen::MatrixXd K(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
    for (std::size_t sx = 0; sx < total; ++sx) {
        const auto bx = static_cast<Eigen::Index>(b_of[sx]);
        if (p2(bx) <= 0.0) {
            for (std::size_t sy = 0; sy < total; ++sy)
                K(static_cast<Eigen::Index>(sx), static_cast<Eigen::Index>(sy)) = joint.pi[sy];
            continue;
        }
        for (std::size_t sy = 0; sy < total; ++sy) {
            const auto ay = static_cast<Eigen::Index>(a_of[sy]);
            const double stage1 = bj.p(ay, bx) / p2(bx);
            const double stage2 = (p1(ay) > 0.0) ? joint.pi[sy] / p1(ay) : 0.0;
            K(static_cast<Eigen::Index>(sx), static_cast<Eigen::Index>(sy)) = stage1 * stage2;
        }
    }
    return K;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_da_stage_kernels(const GridMrf& mrf,
                                                                   const EnumeratedJoint& joint,
                                                                   const Partition& partition) {
    const std::size_t total = checked_state_count(mrf, kMaxStageKernelStates, "build_da_stage_kernels");
    const BlockJoint bj = build_block_joint(mrf, joint, partition);
    const Eigen::VectorXd p1 = bj.p.rowwise().sum();
    const Eigen::VectorXd p2 = bj.p.colwise().sum();

    std::vector<std::size_t> a_of(total), b_of(total);
    std::vector<int> x(static_cast<std::size_t>(mrf.n_nodes()), 0);
    for (std::size_t s = 0; s < total; ++s) {
        a_of[s] = block_index(x, partition.side1, mrf.n_states());
        b_of[s] = block_index(x, partition.side2, mrf.n_states());
        advance(x, mrf.n_states());
    }

    Eigen::MatrixXd K1 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total),
                                               static_cast<Eigen::Index>(total));
    Eigen::MatrixXd K2 = K1;
    for (std::size_t sx = 0; sx < total; ++sx) {
        for (std::size_t sy = 0; sy < total; ++sy) {
            const auto ax = static_cast<Eigen::Index>(a_of[sx]);
            const auto bx = static_cast<Eigen::Index>(b_of[sx]);
            const auto ay = static_cast<Eigen::Index>(a_of[sy]);
            const auto by = static_cast<Eigen::Index>(b_of[sy]);
            if (by == bx)
                K1(static_cast<Eigen::Index>(sx), static_cast<Eigen::Index>(sy)) =
                    (p2(bx) > 0.0) ? bj.p(ay, bx) / p2(bx)
                                   : (sy == sx ? 1.0 : 0.0);
            if (ay == ax)
                K2(static_cast<Eigen::Index>(sx), static_cast<Eigen::Index>(sy)) =
                    (p1(ax) > 0.0) ? bj.p(ax, by) / p1(ax)
                                   : (sy == sx ? 1.0 : 0.0);
        }
    }
    return {std::move(K1), std::move(K2)};
}

Eigen::MatrixXd build_gibbs_kernel(const GridMrf& mrf, const EnumeratedJoint& joint) {
    const std::size_t total = checked_state_count(mrf, kMaxKernelStates, "build_gibbs_kernel");
    const int n = mrf.n_nodes();
    const int k = mrf.n_states();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(total),
                                                  static_cast<Eigen::Index>(total));
    // Site conditionals pi(label | rest), derived from the enumerated joint so
    // this stays an independent cross-check of the sweep sampler.
    std::vector<double> cond(total);
    std::vector<double> row(total);
    std::vector<std::size_t> stride(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) stride[i] = pow_states(k, static_cast<std::size_t>(n - 1 - i));

    for (int i = 0; i < n; ++i) {
        const std::size_t st = stride[i];
        for (std::size_t s = 0; s < total; ++s) {
            const std::size_t digit = (s / st) % static_cast<std::size_t>(k);
            const std::size_t base = s - digit * st;
            double denom = 0.0;
            for (int v = 0; v < k; ++v) denom += joint.pi[base + static_cast<std::size_t>(v) * st];
            cond[s] = (denom > 0.0) ? joint.pi[s] / denom : 1.0 / k;
        }
        for (std::size_t r = 0; r < total; ++r) {
            for (std::size_t s = 0; s < total; ++s) row[s] = 0.0;
            for (std::size_t s = 0; s < total; ++s) {
                const double w = M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
                if (w == 0.0) continue;
                const std::size_t digit = (s / st) % static_cast<std::size_t>(k);
                const std::size_t base = s - digit * st;
                for (int v = 0; v < k; ++v) {
                    const std::size_t y = base + static_cast<std::size_t>(v) * st;
                    row[y] += w * cond[y];
                }
            }
            for (std::size_t s = 0; s < total; ++s)
                M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = row[s];
        }
    }
    return M;
}

double stationary_residual(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi) {
    const Eigen::VectorXd out = K.transpose() * pi;
    return (out - pi).lpNorm<1>();
}

double forward_operator_norm(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi) {
    const Eigen::Index s = K.rows();
    if (K.cols() != s || pi.size() != s)
        throw std::invalid_argument("forward_operator_norm: shape mismatch");
    Eigen::VectorXd sqrt_pi(s), inv_sqrt_pi(s);
    for (Eigen::Index i = 0; i < s; ++i) {
        sqrt_pi(i) = std::sqrt(std::max(pi(i), 0.0));
        inv_sqrt_pi(i) = (pi(i) > 0.0) ? 1.0 / sqrt_pi(i) : 0.0;
    }
    Eigen::MatrixXd S = sqrt_pi.asDiagonal() * K * inv_sqrt_pi.asDiagonal();
    const Eigen::MatrixXd P =
        Eigen::MatrixXd::Identity(s, s) - sqrt_pi * sqrt_pi.transpose();
    const Eigen::MatrixXd F = P * S * P;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F);
    return svd.singularValues()(0);
}

double block_maximal_correlation(const BlockJoint& bj) {
    const Eigen::VectorXd p1 = bj.p.rowwise().sum();
    const Eigen::VectorXd p2 = bj.p.colwise().sum();
    Eigen::MatrixXd Q = bj.p;
    for (Eigen::Index a = 0; a < Q.rows(); ++a)
        for (Eigen::Index b = 0; b < Q.cols(); ++b) {
            const double d = std::sqrt(p1(a) * p2(b));
            Q(a, b) = (d > 0.0) ? Q(a, b) / d : 0.0;
        }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q);
    if (svd.singularValues().size() < 2) return 0.0;
    return svd.singularValues()(1);
}

double block_mutual_information(const BlockJoint& bj) {
    const Eigen::VectorXd p1 = bj.p.rowwise().sum();
    const Eigen::VectorXd p2 = bj.p.colwise().sum();
    double mi = 0.0;
    for (Eigen::Index a = 0; a < bj.p.rows(); ++a)
        for (Eigen::Index b = 0; b < bj.p.cols(); ++b) {
            const double pab = bj.p(a, b);
            if (pab > 0.0) mi += pab * std::log(pab / (p1(a) * p2(b)));
        }
    return mi;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

double joint_entropy(const EnumeratedJoint& joint) { return entropy(joint.pi); }

double step_conditional_entropy(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi) {
    double h = 0.0;
    for (Eigen::Index x = 0; x < K.rows(); ++x) {
        if (pi(x) <= 0.0) continue;
        double hx = 0.0;
        for (Eigen::Index y = 0; y < K.cols(); ++y) {
            const double kxy = K(x, y);
            if (kxy > 0.0) hx -= kxy * std::log(kxy);
        }
        h += pi(x) * hx;
    }
    return h;
}

double var_conditional_expectation(const GridMrf& mrf, const EnumeratedJoint& joint,
                                   std::span<const int> conditioning_nodes,
                                   const std::function<double(std::span<const int>)>& h) {
    const std::size_t groups = pow_states(mrf.n_states(), conditioning_nodes.size());
    std::vector<double> mass(groups, 0.0), moment(groups, 0.0);
    std::vector<int> x(static_cast<std::size_t>(mrf.n_nodes()), 0);
    double mean = 0.0;
    for (std::size_t s = 0; s < joint.pi.size(); ++s) {
        const std::size_t g = block_index(x, conditioning_nodes, mrf.n_states());
        const double hv = h(x);
        mass[g] += joint.pi[s];
        moment[g] += joint.pi[s] * hv;
        mean += joint.pi[s] * hv;
        advance(x, mrf.n_states());
    }
    double var = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        if (mass[g] <= 0.0) continue;
        const double m = moment[g] / mass[g];
        var += mass[g] * (m - mean) * (m - mean);
    }
    return var;
}

RateFit geometric_rate_check(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi,
                             const Eigen::VectorXd& start, int n_steps, double floor) {
    RateFit fit;
    Eigen::VectorXd p = start;
    fit.gaps.reserve(static_cast<std::size_t>(n_steps));
    for (int t = 0; t < n_steps; ++t) {
        p = K.transpose() * p;
        fit.gaps.push_back(0.5 * (p - pi).lpNorm<1>());
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int m = 0;
    for (int t = 0; t < n_steps; ++t) {
        if (fit.gaps[static_cast<std::size_t>(t)] <= floor) break;
        const double xv = static_cast<double>(t + 1);
        const double yv = std::log(fit.gaps[static_cast<std::size_t>(t)]);
        sx += xv;
        sy += yv;
        sxx += xv * xv;
        sxy += xv * yv;
        ++m;
    }
    fit.points_used = m;
    if (m < 3) {
        fit.immediate = true;
        fit.slope = -std::numeric_limits<double>::infinity();
        return fit;
    }
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    fit.slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
    return fit;
}

std::vector<double> stationary_autocovariance(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi,
                                              const Eigen::VectorXd& h, int max_lag) {
    const double mean = pi.dot(h);
    std::vector<double> cov;
    cov.reserve(static_cast<std::size_t>(max_lag) + 1);
    Eigen::VectorXd v = h;
    for (int lag = 0; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (Eigen::Index i = 0; i < pi.size(); ++i) c += pi(i) * h(i) * v(i);
        cov.push_back(c - mean * mean);
        v = K * v;
    }
    return cov;
}

const char* sweep_family_name(int index) {
    return (index / 2) % 2 == 0 ? "potts" : "random_table";
}

GridMrf make_sweep_model(std::uint64_t master_seed, int index, int rows, int cols) {
    std::mt19937_64 rng(derive_seed(master_seed, "sweep-model", static_cast<std::uint64_t>(index)));
    if (rows == 0 || cols == 0) {
        rows = 2;
        cols = (index % 2 == 0) ? 2 : 3;
    }
    const int k = 2;
    std::vector<int> obs(static_cast<std::size_t>(rows) * cols);
    for (auto& y : obs) y = static_cast<int>(uniform01(rng) * k) % k;
    PotentialSpec spec;
    if (std::string_view(sweep_family_name(index)) == "potts") {
        spec.kind = PotentialSpec::Kind::potts;
        spec.potts_coupling = 0.1 + 1.4 * uniform01(rng);
        spec.potts_obs_strength = uniform01(rng);
    } else {
        spec.kind = PotentialSpec::Kind::random_table;
        spec.table_seed = rng();
    }
    return build_grid_mrf(rows, cols, k, spec, obs);
}

}  // namespace gridmrf
