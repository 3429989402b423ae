#include "mstate/multi_index.hpp"

#include "mstate/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace mstate {

MultiIndex::MultiIndex(std::vector<int> entries) : k_(std::move(entries)) {
    for (int v : k_)
        if (v < 0) throw ConfigError("multi-index entries must be non-negative");
}

MultiIndex MultiIndex::unit(int n, int l) {
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    e.at(static_cast<std::size_t>(l)) = 1;
    return MultiIndex(std::move(e));
}

int MultiIndex::total() const { return std::accumulate(k_.begin(), k_.end(), 0); }

std::size_t MultiIndex::cardinality() const {
    std::size_t c = 1;
    for (int v : k_) c *= static_cast<std::size_t>(v) + 1;
    return c - 1;
}

bool MultiIndex::is_zero() const {
    return std::all_of(k_.begin(), k_.end(), [](int v) { return v == 0; });
}

int MultiIndex::unit_direction() const {
    int dir = -1;
    for (int l = 0; l < size(); ++l) {
        if (k_[l] == 0) continue;
        if (k_[l] != 1 || dir >= 0) return -1;
        dir = l;
    }
    return dir;
}

bool MultiIndex::leq(const MultiIndex& other) const {
    if (size() != other.size()) throw ConfigError("multi-index dimension mismatch");
    for (int l = 0; l < size(); ++l)
        if (k_[l] > other.k_[l]) return false;
    return true;
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
    if (!other.leq(*this)) throw ConfigError("multi-index difference would be negative");
    std::vector<int> d(k_);
    for (int l = 0; l < size(); ++l) d[l] -= other.k_[l];
    return MultiIndex(std::move(d));
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
    if (size() != other.size()) throw ConfigError("multi-index dimension mismatch");
    std::vector<int> d(k_);
    for (int l = 0; l < size(); ++l) d[l] += other.k_[l];
    return MultiIndex(std::move(d));
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (int l = 0; l < size(); ++l) os << (l ? "," : "") << k_[l];
    os << ')';
    return os.str();
}

MultiIndex parse_multi_index(const std::string& text) {
    std::vector<int> entries;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
                throw ConfigError("bad multi-index '" + text + "'");
            entries.push_back(v);
        } catch (const std::logic_error&) {
            throw ConfigError("bad multi-index '" + text + "'");
        }
    }
    if (entries.empty()) throw ConfigError("empty multi-index");
    return MultiIndex(std::move(entries));
}

std::vector<MultiIndex> lex_enumerate(const MultiIndex& k) {
    LowerSet set(k);
    return {set.elements().begin() + 1, set.elements().end()};
}

LowerSet::LowerSet(const MultiIndex& k) : k_(k), strides_(static_cast<std::size_t>(k.size()), 1) {
    const int n = k.size();
    for (int l = n - 2; l >= 0; --l)
        strides_[static_cast<std::size_t>(l)] =
            strides_[static_cast<std::size_t>(l) + 1] * (static_cast<std::size_t>(k[l + 1]) + 1);
    // Odometer with the last coordinate fastest visits N_0^n boxes in lex order.
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    const std::size_t count = k.cardinality() + 1;
    elements_.reserve(count);
    for (std::size_t p = 0; p < count; ++p) {
        elements_.emplace_back(digits);
        for (int l = n - 1; l >= 0; --l) {
            if (digits[static_cast<std::size_t>(l)] < k[l]) {
                ++digits[static_cast<std::size_t>(l)];
                break;
            }
            digits[static_cast<std::size_t>(l)] = 0;
        }
    }
}

std::size_t LowerSet::position(const MultiIndex& y) const {
    if (!contains(y)) throw ConfigError("multi-index " + y.to_string() + " is not below " + k_.to_string());
    std::size_t p = 0;
    for (int l = 0; l < y.size(); ++l) p += static_cast<std::size_t>(y[l]) * strides_[static_cast<std::size_t>(l)];
    return p;
}

bool LowerSet::contains(const MultiIndex& y) const { return y.size() == k_.size() && y.leq(k_); }

bool check_lex_closure(const MultiIndex& k) {
    const LowerSet set(k);  // set[0] is y^0 = 0
    for (std::size_t i = 1; i < set.size(); ++i) {
        for (std::size_t m = 0; m < i; ++m) {
            if (!set[m].leq(set[i])) continue;
            std::set<MultiIndex> reachable;
            for (std::size_t j = m; j < i; ++j)
                if (set[j].leq(set[i])) reachable.insert(set[i] - set[j]);
            for (const auto& xi : lex_enumerate(set[i] - set[m]))
                if (!reachable.contains(xi)) return false;
        }
    }
    return true;
}

std::uint64_t binomial(int n, int r) {
    if (r < 0 || r > n) return 0;
    r = std::min(r, n - r);
    // C(n, j) = C(n, j-1) * (n - j + 1) / j stays integral at every step.
    unsigned __int128 c = 1;
    for (int j = 1; j <= r; ++j) {
        c = c * static_cast<unsigned>(n - j + 1) / static_cast<unsigned>(j);
        if (c > std::numeric_limits<std::uint64_t>::max())
            throw CapExceeded("binomial coefficient C(" + std::to_string(n) + "," + std::to_string(r) +
                              ") exceeds 64-bit range");
    }
    return static_cast<std::uint64_t>(c);
}

double multi_binomial(const MultiIndex& k, const MultiIndex& y) {
    double c = 1.0;
    for (int l = 0; l < k.size(); ++l) c *= static_cast<double>(binomial(k[l], y[l]));
    return c;
}

} // namespace mstate
