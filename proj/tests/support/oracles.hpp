#pragma once

// Independent reference computations. None of these call the library routine
// they check; they take the slow, literal route.

#include "toporag/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace toporag::oracle {

using Dense = Eigen::MatrixXd;

inline Dense dense_adjacency(const TextAttributedGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.node_count());
    Dense a = Dense::Zero(n, n);
    for (auto [u, v] : g.edges()) {
        a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = 1.0;
        a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = 1.0;
    }
    return a;
}

inline Dense dense_random_walk(const TextAttributedGraph& g) {
    Dense a = dense_adjacency(g);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double d = a.row(i).sum();
        if (d > 0) a.row(i) /= d;
    }
    return a;
}

/// sum_k alpha_k * A^k * B with each power formed explicitly.
inline Dense diffusion(const TextAttributedGraph& g, const Dense& basis, const std::vector<double>& alphas) {
    const Dense a = dense_random_walk(g);
    Dense total = Dense::Zero(basis.rows(), basis.cols());
    for (std::size_t k = 1; k <= alphas.size(); ++k) {
        Dense power = Dense::Identity(a.rows(), a.cols());
        for (std::size_t m = 0; m < k; ++m) power = power * a;
        total += alphas[k - 1] * power * basis;
    }
    return total;
}

/// exp(-s L) by scaling and squaring around a truncated Taylor series.
inline Dense heat_kernel_series(const Dense& lap, double s) {
    const double norm = lap.cwiseAbs().rowwise().sum().maxCoeff() * s;
    int squarings = 0;
    while (norm / std::pow(2.0, squarings) > 0.5) ++squarings;
    const Dense x = -s * lap / std::pow(2.0, squarings);
    Dense term = Dense::Identity(lap.rows(), lap.cols());
    Dense sum = term;
    for (int m = 1; m <= 30; ++m) {
        term = term * x / static_cast<double>(m);
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

struct Ranked {
    std::size_t id;
    double score;
};

/// Score every pool member, sort fully, keep the first k.
inline std::vector<Ranked> brute_topk(const std::function<double(std::size_t, std::size_t)>& score,
                                      std::size_t target, const std::vector<std::size_t>& pool, std::size_t k) {
    std::vector<Ranked> all;
    for (std::size_t c : pool) {
        if (c != target) all.push_back({c, score(target, c)});
    }
    std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

/// Sentence BLEU-4 with add-epsilon smoothing on zero precisions. N-grams are
/// keyed by joined strings and the precisions are multiplied directly.
inline double bleu4(const std::vector<std::string>& cand, const std::vector<std::string>& ref, double eps = 0.1) {
    if (cand.empty()) return 0.0;
    auto grams = [](const std::vector<std::string>& toks, std::size_t n) {
        std::map<std::string, int> counts;
        for (std::size_t i = 0; i + n <= toks.size(); ++i) {
            std::string key;
            for (std::size_t j = i; j < i + n; ++j) key += toks[j] + '\x1f';
            ++counts[key];
        }
        return counts;
    };
    long double product = 1.0L;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto c = grams(cand, n);
        const auto r = grams(ref, n);
        long double matched = 0, total = 0;
        for (const auto& [g, cnt] : c) {
            total += cnt;
            const auto it = r.find(g);
            matched += it == r.end() ? 0 : std::min(cnt, it->second);
        }
        const long double p = matched > 0 ? matched / total : (matched + eps) / (total + eps);
        product *= p;
    }
    const long double geo = std::pow(product, 0.25L);
    const long double c = static_cast<long double>(cand.size());
    const long double r = static_cast<long double>(ref.size());
    const long double bp = c >= r ? 1.0L : std::exp(1.0L - r / c);
    return static_cast<double>(bp * geo);
}

/// LCS by the full (n+1) x (m+1) table.
inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
        }
    }
    return t[a.size()][b.size()];
}

struct F1 {
    double p = 0, r = 0, f = 0;
};

/// Greedy max-cosine matching by explicit double loops.
inline F1 greedy_f1(const Dense& cand, const Dense& ref) {
    if (cand.rows() == 0 || ref.rows() == 0) return {};
    auto cos = [](const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v) {
        long double dot = 0, nu = 0, nv = 0;
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            dot += static_cast<long double>(u(k)) * v(k);
            nu += static_cast<long double>(u(k)) * u(k);
            nv += static_cast<long double>(v(k)) * v(k);
        }
        if (nu == 0 || nv == 0) return 0.0;
        return static_cast<double>(dot / std::sqrt(nu * nv));
    };
    F1 out;
    for (Eigen::Index i = 0; i < cand.rows(); ++i) {
        double best = -2;
        for (Eigen::Index j = 0; j < ref.rows(); ++j) best = std::max(best, cos(cand.row(i), ref.row(j)));
        out.p += best;
    }
    for (Eigen::Index j = 0; j < ref.rows(); ++j) {
        double best = -2;
        for (Eigen::Index i = 0; i < cand.rows(); ++i) best = std::max(best, cos(cand.row(i), ref.row(j)));
        out.r += best;
    }
    out.p /= static_cast<double>(cand.rows());
    out.r /= static_cast<double>(ref.rows());
    out.f = out.p + out.r > 0 ? 2 * out.p * out.r / (out.p + out.r) : 0.0;
    return out;
}

/// Pearson r from the definitional sums in long double.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<long double>(x.size());
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

}  // namespace toporag::oracle
