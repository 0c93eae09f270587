#include "dispatchlab/stats.hpp"

#include <cmath>
#include <cstddef>

#include "dispatchlab/error.hpp"

namespace dispatchlab::stats {

namespace {

// Lanczos log-gamma.
double log_gamma(double x) {
    static const double c[8] = {676.5203681218851,     -1259.1392167224028,
                                771.32342877765313,    -176.61502916214059,
                                12.507343278686905,    -0.13857109526572012,
                                9.9843695780195716e-6, 1.5056327351493116e-7};
    if (x < 0.5) {
        // reflection
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    x -= 1.0;
    double a = 0.99999999999980993;
    double t = x + 7.5;
    for (int i = 0; i < 8; i++) a += c[i] / (x + i + 1);
    return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 1e-14;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; m++) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front =
        log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (df <= 0.0) raise(Errc::InvalidArgument, "t CDF needs df > 0");
    double x = df / (df + t * t);
    double p = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - p : p;
}

double student_t_975(double df) {
    // Bisection on the CDF. Monotone, so this is robust; 1e-12 in t is far
    // tighter than the 1e-6 accuracy target in p.
    double lo = 0.0, hi = 1e3;
    while (student_t_cdf(hi, df) < 0.975) hi *= 2.0;
    for (int i = 0; i < 200; i++) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < 0.975)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

SummaryStats summarize(const std::vector<double>& samples) {
    if (samples.size() < 2) raise(Errc::TooFewSamples, "summarize needs n >= 2");
    SummaryStats s;
    s.n = samples.size();
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : samples) {
        double d = v - s.mean;
        ss += d * d;
    }
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    double half = student_t_975(static_cast<double>(s.n - 1)) * s.std /
                  std::sqrt(static_cast<double>(s.n));
    s.ci95_low = s.mean - half;
    s.ci95_high = s.mean + half;
    s.cv_percent = s.mean > 0.0 ? s.std / s.mean * 100.0 : 0.0;
    return s;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) raise(Errc::TooFewSamples, "welch_t_test needs n >= 2");
    auto mean_var = [](const std::vector<double>& v, double& m, double& var) {
        m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        var /= static_cast<double>(v.size() - 1);
    };
    double ma, va, mb, vb;
    mean_var(a, ma, va);
    mean_var(b, mb, vb);
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double sa = va / na, sb = vb / nb;

    WelchResult r;
    if (sa + sb == 0.0) {
        r.degenerate = true;
        r.t_stat = 0.0;
        r.df = na + nb - 2.0;
        r.p_two_tailed = (ma == mb) ? 1.0 : 0.0;
        return r;
    }
    r.t_stat = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) /
           (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    double cdf = student_t_cdf(-std::fabs(r.t_stat), r.df);
    r.p_two_tailed = 2.0 * cdf;
    if (r.p_two_tailed > 1.0) r.p_two_tailed = 1.0;
    return r;
}

}  // namespace dispatchlab::stats
