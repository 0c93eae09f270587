#include "dispatchlab/oracle.hpp"

#include <cmath>

namespace dispatchlab::oracle {

HostTensor matmul(const HostTensor& a, const HostTensor& b) {
    size_t m = a.spec.rows(), k = a.spec.cols();
    if (b.spec.rows() != k)
        raise(Errc::DimsMismatch, "matmul: A cols " + std::to_string(k) + " != B rows " +
                                      std::to_string(b.spec.rows()));
    size_t n = b.spec.cols();
    HostTensor out = HostTensor::zeros({m, n});
    for (size_t i = 0; i < m; i++) {
        for (size_t j = 0; j < n; j++) {
            double acc = 0.0;
            for (size_t kk = 0; kk < k; kk++)
                acc += double(a.data[i * k + kk]) * double(b.data[kk * n + j]);
            out.data[i * n + j] = static_cast<float>(acc);
        }
    }
    return out;
}

HostTensor matmul_wt(const HostTensor& x, const HostTensor& w) {
    size_t rows = x.spec.rows(), k = x.spec.cols();
    if (w.spec.cols() != k)
        raise(Errc::DimsMismatch, "matmul_wt: x cols " + std::to_string(k) + " != W in-dim " +
                                      std::to_string(w.spec.cols()));
    size_t out_dim = w.spec.rows();
    HostTensor out = HostTensor::zeros({rows, out_dim});
    for (size_t r = 0; r < rows; r++) {
        for (size_t o = 0; o < out_dim; o++) {
            double acc = 0.0;
            for (size_t kk = 0; kk < k; kk++)
                acc += double(x.data[r * k + kk]) * double(w.data[o * k + kk]);
            out.data[r * out_dim + o] = static_cast<float>(acc);
        }
    }
    return out;
}

HostTensor rmsnorm(const HostTensor& x, const HostTensor& weight, double eps) {
    size_t rows = x.spec.rows(), hidden = x.spec.cols();
    if (weight.element_count() != hidden)
        raise(Errc::DimsMismatch, "rmsnorm: weight length != hidden");
    HostTensor out = HostTensor::zeros({rows, hidden});
    for (size_t r = 0; r < rows; r++) {
        double ss = 0.0;
        for (size_t c = 0; c < hidden; c++) {
            double v = x.data[r * hidden + c];
            ss += v * v;
        }
        double scale = 1.0 / std::sqrt(ss / double(hidden) + eps);
        for (size_t c = 0; c < hidden; c++)
            out.data[r * hidden + c] =
                static_cast<float>(double(x.data[r * hidden + c]) * scale *
                                   double(weight.data[c]));
    }
    return out;
}

HostTensor softmax(const HostTensor& x) {
    size_t rows = x.spec.rows(), cols = x.spec.cols();
    HostTensor out = HostTensor::zeros({rows, cols});
    for (size_t r = 0; r < rows; r++) {
        double mx = -1e300;
        for (size_t c = 0; c < cols; c++) mx = std::max(mx, double(x.data[r * cols + c]));
        double sum = 0.0;
        for (size_t c = 0; c < cols; c++) sum += std::exp(double(x.data[r * cols + c]) - mx);
        for (size_t c = 0; c < cols; c++)
            out.data[r * cols + c] =
                static_cast<float>(std::exp(double(x.data[r * cols + c]) - mx) / sum);
    }
    return out;
}

size_t argmax(const HostTensor& x) {
    size_t best = 0;
    float bv = x.data.empty() ? 0.0f : x.data[0];
    for (size_t i = 1; i < x.data.size(); i++) {
        if (x.data[i] > bv) {
            bv = x.data[i];
            best = i;
        }
    }
    return best;
}

float silu(float x) {
    return static_cast<float>(double(x) / (1.0 + std::exp(-double(x))));
}

HostTensor gate_up_silu(const HostTensor& x, const HostTensor& wg, const HostTensor& wu) {
    if (wg.spec != wu.spec) raise(Errc::DimsMismatch, "gate_up_silu: Wg shape != Wu shape");
    HostTensor g = matmul_wt(x, wg);
    HostTensor u = matmul_wt(x, wu);
    HostTensor out = HostTensor::zeros(g.spec.shape);
    for (size_t i = 0; i < out.data.size(); i++)
        out.data[i] = static_cast<float>(double(silu(g.data[i])) * double(u.data[i]));
    return out;
}

HostTensor mlp_block(const HostTensor& x, const MlpWeights& w, double eps) {
    HostTensor normed = rmsnorm(x, w.norm_weight, eps);
    HostTensor act = gate_up_silu(normed, w.gate, w.up);
    HostTensor proj = matmul_wt(act, w.down);
    HostTensor out = HostTensor::zeros(x.spec.shape);
    for (size_t i = 0; i < out.data.size(); i++)
        out.data[i] = static_cast<float>(double(x.data[i]) + double(proj.data[i]));
    return out;
}

ComparisonReport sampled_matmul_check(const HostTensor& a, const HostTensor& b,
                                      const HostTensor& got, size_t n_samples,
                                      ToleranceSpec tol, uint64_t seed) {
    size_t m = a.spec.rows(), k = a.spec.cols(), n = b.spec.cols();
    if (b.spec.rows() != k || got.spec.rows() != m || got.spec.cols() != n)
        raise(Errc::ShapeMismatch, "sampled_matmul_check: inconsistent shapes");
    SeededRng rng(seed);
    ComparisonReport r;
    for (size_t s = 0; s < n_samples; s++) {
        size_t i = rng.next_u32() % m;
        size_t j = rng.next_u32() % n;
        double acc = 0.0;
        for (size_t kk = 0; kk < k; kk++)
            acc += double(a.data[i * k + kk]) * double(b.data[kk * n + j]);
        double d = std::fabs(acc - double(got.data[i * n + j]));
        if (d > r.max_abs_diff) {
            r.max_abs_diff = d;
            r.argmax_of_diff = i * n + j;
        }
    }
    r.pass = r.max_abs_diff < tol.max_abs;
    return r;
}

ComparisonReport compare(const HostTensor& a, const HostTensor& b, ToleranceSpec tol) {
    if (a.spec != b.spec) raise(Errc::ShapeMismatch, "compare: " + a.spec.to_string() +
                                                        " vs " + b.spec.to_string());
    ComparisonReport r;
    for (size_t i = 0; i < a.data.size(); i++) {
        double d = std::fabs(double(a.data[i]) - double(b.data[i]));
        if (d > r.max_abs_diff) {
            r.max_abs_diff = d;
            r.argmax_of_diff = i;
        }
    }
    r.pass = r.max_abs_diff < tol.max_abs;
    return r;
}

}  // namespace dispatchlab::oracle
