#include "reference_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace refstats {

namespace {

double simpson(double (*f)(double, double), double param, double a, double b) {
    double c = (a + b) / 2.0;
    return (b - a) / 6.0 * (f(a, param) + 4.0 * f(c, param) + f(b, param));
}

double adaptive_step(double (*f)(double, double), double param, double a, double b, double whole,
                     double eps, int depth) {
    double c = (a + b) / 2.0;
    double left = simpson(f, param, a, c);
    double right = simpson(f, param, c, b);
    double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * eps)
        return left + right + delta / 15.0;
    return adaptive_step(f, param, a, c, left, eps / 2.0, depth - 1) +
           adaptive_step(f, param, c, b, right, eps / 2.0, depth - 1);
}

double integrate(double (*f)(double, double), double param, double a, double b,
                 double eps = 1e-12) {
    if (a >= b) return 0.0;
    return adaptive_step(f, param, a, b, simpson(f, param, a, b), eps, 48);
}

double normal_pdf(double x, double) { return std::exp(-x * x / 2.0) / std::sqrt(2.0 * M_PI); }

double t_pdf(double x, double df) {
    double c = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
               0.5 * std::log(df * M_PI);
    return std::exp(c - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

// chi^2 density after the x = u^2 substitution: 2 u^{df-1} e^{-u^2/2} / (2^{df/2} Gamma(df/2)).
double chi2_sub_pdf(double u, double df) {
    if (u <= 0.0) {
        if (df == 1.0)
            return std::exp(std::log(2.0) - 0.5 * std::log(2.0) - std::lgamma(0.5));
        return 0.0;
    }
    double logv = std::log(2.0) + (df - 1.0) * std::log(u) - u * u / 2.0 -
                  (df / 2.0) * std::log(2.0) - std::lgamma(df / 2.0);
    return std::exp(logv);
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

} // namespace

std::vector<double> naive_ranks(std::span<const double> values) {
    size_t n = values.size();
    std::vector<double> ranks(n);
    for (size_t i = 0; i < n; ++i) {
        size_t less = 0, equal = 0;
        for (size_t j = 0; j < n; ++j) {
            if (values[j] < values[i]) ++less;
            else if (values[j] == values[i]) ++equal;
        }
        ranks[i] = 1.0 + double(less) + (double(equal) - 1.0) / 2.0;
    }
    return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    auto rx = naive_ranks(x);
    auto ry = naive_ranks(y);
    double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::runtime_error("constant input");
    return sxy / std::sqrt(sxx * syy);
}

double spearman_p(std::span<const double> x, std::span<const double> y) {
    double rho = spearman_rho(x, y);
    double n = double(x.size());
    double denom = 1.0 - rho * rho;
    if (denom <= 0.0) return 0.0;
    double t = rho * std::sqrt((n - 2.0) / denom);
    return t_two_sided_p(t, n - 2.0);
}

double kruskal_wallis_h(const std::vector<std::vector<double>>& groups) {
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    auto ranks = naive_ranks(pooled);
    double n = double(pooled.size());
    double grand = mean_of(ranks);

    double ssb = 0.0, sst = 0.0;
    size_t offset = 0;
    for (const auto& g : groups) {
        double gm = 0.0;
        for (size_t i = 0; i < g.size(); ++i) gm += ranks[offset + i];
        gm /= double(g.size());
        ssb += double(g.size()) * (gm - grand) * (gm - grand);
        offset += g.size();
    }
    for (double r : ranks) sst += (r - grand) * (r - grand);
    if (sst == 0.0) return 0.0;
    return (n - 1.0) * ssb / sst;
}

double kruskal_wallis_p(const std::vector<std::vector<double>>& groups) {
    double h = kruskal_wallis_h(groups);
    if (h <= 0.0) return 1.0;
    return chi2_upper_p(h, double(groups.size()) - 1.0);
}

double mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    double u = 0.0;
    for (double x : a)
        for (double y : b) {
            if (x > y) u += 1.0;
            else if (x == y) u += 0.5;
        }
    return u;
}

double mann_whitney_p(std::span<const double> a, std::span<const double> b) {
    double u = mann_whitney_u(a, b);
    double na = double(a.size()), nb = double(b.size());
    double n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    auto ranks = naive_ranks(pooled);
    // Finite-population variance of the midranks (divisor N).
    double mean = mean_of(ranks);
    double pop_var = 0.0;
    for (double r : ranks) pop_var += (r - mean) * (r - mean);
    pop_var /= n;
    double variance = na * nb * pop_var / (n - 1.0);
    if (variance <= 0.0) return 1.0;
    double z = (u - na * nb / 2.0) / std::sqrt(variance);
    return normal_two_sided_p(z);
}

double chi_square_stat(const std::vector<std::vector<double>>& table) {
    size_t rows = table.size(), cols = table[0].size();
    std::vector<double> rs(rows, 0.0), cs(cols, 0.0);
    double n = 0.0;
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            rs[r] += table[r][c];
            cs[c] += table[r][c];
            n += table[r][c];
        }
    double acc = 0.0;
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            double denom = rs[r] * cs[c];
            if (denom == 0.0) throw std::runtime_error("zero expected count");
            acc += table[r][c] * table[r][c] / denom;
        }
    return n * (acc - 1.0);
}

double chi_square_p(const std::vector<std::vector<double>>& table) {
    double stat = chi_square_stat(table);
    double df = double((table.size() - 1) * (table[0].size() - 1));
    return chi2_upper_p(stat, df);
}

double krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& coder_by_item,
                          bool ordinal) {
    size_t n_items = 0;
    for (const auto& row : coder_by_item) n_items = std::max(n_items, row.size());

    std::vector<std::vector<double>> units;
    for (size_t item = 0; item < n_items; ++item) {
        std::vector<double> values;
        for (const auto& row : coder_by_item)
            if (item < row.size() && row[item]) values.push_back(*row[item]);
        if (values.size() >= 2) units.push_back(std::move(values));
    }
    if (units.empty()) throw std::runtime_error("insufficient pairable values");

    // Marginal count of each value across pairable units, by direct counting.
    std::map<double, double> marginal;
    std::vector<double> all_values;
    for (const auto& unit : units)
        for (double v : unit) {
            marginal[v] += 1.0;
            all_values.push_back(v);
        }

    auto delta2 = [&](double a, double b) -> double {
        if (a == b) return 0.0;
        if (!ordinal) return 1.0;
        double lo = std::min(a, b), hi = std::max(a, b);
        double between = 0.0;
        for (const auto& [value, count] : marginal)
            if (value >= lo && value <= hi) between += count;
        double diff = between - (marginal.at(lo) + marginal.at(hi)) / 2.0;
        return diff * diff;
    };

    double n = double(all_values.size());
    double d_obs = 0.0;
    for (const auto& unit : units) {
        double m = double(unit.size());
        for (size_t i = 0; i < unit.size(); ++i)
            for (size_t j = 0; j < unit.size(); ++j) {
                if (i == j) continue;
                d_obs += delta2(unit[i], unit[j]) / (m - 1.0);
            }
    }
    d_obs /= n;

    double d_exp = 0.0;
    for (size_t i = 0; i < all_values.size(); ++i)
        for (size_t j = 0; j < all_values.size(); ++j) {
            if (i == j) continue;
            d_exp += delta2(all_values[i], all_values[j]);
        }
    d_exp /= n * (n - 1.0);
    if (d_exp == 0.0) {
        if (units.size() >= 2 && d_obs == 0.0) return 1.0;
        throw std::runtime_error("insufficient pairable values");
    }
    return 1.0 - d_obs / d_exp;
}

double normal_two_sided_p(double z) {
    double az = std::fabs(z);
    double half = integrate(normal_pdf, 0.0, 0.0, az);
    return std::max(0.0, 1.0 - 2.0 * half);
}

double t_two_sided_p(double t, double df) {
    double at = std::fabs(t);
    double half = integrate(t_pdf, df, 0.0, at);
    return std::max(0.0, 1.0 - 2.0 * half);
}

double chi2_upper_p(double x, double df) {
    if (x <= 0.0) return 1.0;
    double lower = integrate(chi2_sub_pdf, df, 0.0, std::sqrt(x));
    return std::max(0.0, 1.0 - lower);
}

} // namespace refstats
