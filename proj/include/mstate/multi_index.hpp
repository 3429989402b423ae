#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace mstate {

// k in N_0^n naming a mixed moment E[prod_l U_l^{k_l}].
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> entries);
    MultiIndex(std::initializer_list<int> entries) : MultiIndex(std::vector<int>(entries)) {}

    static MultiIndex zero(int n) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(n), 0)); }
    static MultiIndex unit(int n, int l);

    int size() const { return static_cast<int>(k_.size()); }
    int operator[](int l) const { return k_[static_cast<std::size_t>(l)]; }
    const std::vector<int>& entries() const { return k_; }

    // k-bar: sum of the entries.
    int total() const;
    // |k| = prod (k_l + 1) - 1, the size of S(k).
    std::size_t cardinality() const;

    bool is_zero() const;
    // True for a unit vector e_l; unit_direction() gives l (or -1).
    bool is_unit() const { return unit_direction() >= 0; }
    int unit_direction() const;

    // Componentwise order.
    bool leq(const MultiIndex& other) const;

    MultiIndex operator-(const MultiIndex& other) const;
    MultiIndex operator+(const MultiIndex& other) const;

    // Lexicographic order.
    auto operator<=>(const MultiIndex&) const = default;
    bool operator==(const MultiIndex&) const = default;

    std::string to_string() const;  // "(1,0,2)"

private:
    std::vector<int> k_;
};

MultiIndex parse_multi_index(const std::string& text);  // "1,0,2"

// S(k) in lexicographic order (last coordinate fastest).
std::vector<MultiIndex> lex_enumerate(const MultiIndex& k);

// S~(k) = {0} u S(k): zero first, then lex order. Position of y inside this
// list is the mixed-radix number with digits y_l and bases k_l + 1.
class LowerSet {
public:
    explicit LowerSet(const MultiIndex& k);

    const MultiIndex& top() const { return k_; }
    std::size_t size() const { return elements_.size(); }
    const MultiIndex& operator[](std::size_t p) const { return elements_[p]; }
    const std::vector<MultiIndex>& elements() const { return elements_; }

    // Position of y (requires y <= k).
    std::size_t position(const MultiIndex& y) const;
    bool contains(const MultiIndex& y) const;

private:
    MultiIndex k_;
    std::vector<std::size_t> strides_;
    std::vector<MultiIndex> elements_;
};

// Closure property of the lex ordering: for every i and every
// m < i with y^i >= y^m, S(y^i - y^m) is contained in {y^i - y^j : m <= j < i}
// (y^0 := 0).
bool check_lex_closure(const MultiIndex& k);

// Exact binomial coefficient; throws CapExceeded if it does not fit in 64 bits.
std::uint64_t binomial(int n, int r);

// prod_l C(k_l, y_l) as a double (exact for values below 2^53).
double multi_binomial(const MultiIndex& k, const MultiIndex& y);

} // namespace mstate
