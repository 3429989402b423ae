#pragma once

#include "mstate/moments.hpp"

namespace mstate {

// Block generator F_U^(k)(x) of size (|k|+1) J. Block row K - p belongs to
// y^p, the p-th element of S~(k) in lex order (K = |k|), so the zero index
// sits in the last block row and the generator is block upper triangular.
class BlockGenerator {
public:
    BlockGenerator(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k);

    Eigen::Index dim() const { return static_cast<Eigen::Index>(order_.size()) * J_; }
    int num_states() const { return J_; }
    const LowerSet& order() const { return order_; }
    std::vector<double> breakpoints() const;

    void evaluate(double x, Matrix& out) const;
    MatrixFunction as_function() const;

private:
    enum class Kind { Zero, Reward, Cross };
    struct Entry {
        std::size_t p, q;  // lex positions, q < p
        Kind kind;
        int contract;      // Reward
        std::size_t xi;    // Cross: lex position of y^p - y^q
        double coeff;
    };

    const ModelSpec* model_;
    const PaymentSet* payments_;
    LowerSet order_;
    int J_;
    std::vector<Entry> entries_;
    std::vector<std::size_t> cross_positions_;
};

Matrix block_generator(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k, double x);

struct BlockResult {
    LowerSet order;
    int num_states = 0;
    Matrix G;  // prod_{(s,t]} (I + F du)

    // J x J block at block row r, block column c.
    Matrix block(std::size_t r, std::size_t c) const;
    // V^(y)(s,t) read from the last block column.
    Matrix moment(const MultiIndex& y) const;
};

// Full product integral of the block generator on [s, t]. Throws CapExceeded
// when (|k|+1) J exceeds options.block_cap.
BlockResult block_product_integral_moments(const ModelSpec& model, const PaymentSet& payments,
                                           const MultiIndex& k, double s, double t,
                                           const MomentOptions& options = {});

// Partial moments at every node of [options.s_min, t], carrying only the last
// block column through the sweep.
MomentGrid block_moment_curves(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k, double t,
                               const MomentOptions& options = {});

// Check of every block of G against the rescaled moment it should equal:
// block(K-i, K-m) = 1{y^i >= y^m} C(y^i, y^m) exp(-|y^m| int_s^t r) V^(y^i - y^m).
struct ScalingCheck {
    std::size_t i = 0, m = 0;
    bool expected_zero = false;
    double error = 0.0;  // max|a-b| / max|b|, or max|a| for zero blocks
};

struct ScalingReport {
    std::vector<ScalingCheck> checks;
    double max_error = 0.0;
};

ScalingReport verify_block_scaling(const BlockResult& result, const ModelSpec& model, double s, double t,
                                   double h = kDefaultStep);

} // namespace mstate
