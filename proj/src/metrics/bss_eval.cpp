#include "contsep/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "contsep/error.hpp"
#include "contsep/fft.hpp"
#include "contsep/kernels.hpp"

namespace contsep::metrics {

namespace {

std::int64_t next_pow2(std::int64_t n) {
    std::int64_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place Cholesky; false on a non-positive pivot.
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    return true;
}

void cholesky_solve(const std::vector<double>& l, std::size_t n, std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * x[k];
        x[i] = s / l[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l[k * n + i] * x[k];
        x[i] = s / l[i * n + i];
    }
}

// Solve G x = rhs with the ridge fallback on singular G.
std::vector<double> solve_gram(std::vector<double> gram, std::vector<double> rhs, std::size_t n) {
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += gram[i * n + i];
    std::vector<double> factor = gram;
    if (!cholesky(factor, n)) {
        std::fprintf(stderr,
                     "warning: singular Gram matrix in bss decomposition, applying ridge\n");
        const double ridge = 1e-10 * trace;
        factor = gram;
        for (std::size_t i = 0; i < n; ++i) factor[i * n + i] += ridge;
        if (!cholesky(factor, n)) {
            throw NumericError("Gram matrix not positive definite even after ridge");
        }
    }
    cholesky_solve(factor, n, rhs);
    return rhs;
}

double energy(const std::vector<double>& x) {
    return kernels::active().dot(x.data(), x.data(), x.size());
}

double capped_ratio_db(double num, double den) {
    if (!(num > 0.0)) return -100.0;
    if (den <= 1e-20 * num) return 100.0;
    const double v = 10.0 * std::log10(num / den);
    return std::min(std::max(v, -100.0), 100.0);
}

}  // namespace

BssDecomposition bss_decompose(const std::vector<double>& estimate,
                               const std::vector<std::vector<double>>& references,
                               std::size_t target_idx, int filter_len) {
    const std::size_t nsrc = references.size();
    if (nsrc == 0) throw InputError("bss decomposition needs at least one reference");
    if (target_idx >= nsrc) throw InputError("bss target index out of range");
    if (filter_len < 1) throw ConfigError("bss filter length must be >= 1");
    const std::size_t n = estimate.size();
    for (const auto& r : references) {
        if (r.size() != n) {
            throw DimensionError("reference length " + std::to_string(r.size()) +
                                 " does not match estimate length " + std::to_string(n));
        }
    }
    const std::size_t L = static_cast<std::size_t>(filter_len);
    const std::int64_t nfft = next_pow2(static_cast<std::int64_t>(n + L));
    const dsp::Fft fft(nfft);

    // Spectra of zero-padded signals.
    const auto transform = [&](const std::vector<double>& x) {
        std::vector<double> re(static_cast<std::size_t>(nfft), 0.0);
        std::vector<double> im(static_cast<std::size_t>(nfft), 0.0);
        std::copy(x.begin(), x.end(), re.begin());
        std::vector<double> fre(re.size()), fim(im.size());
        fft.forward(re.data(), nullptr, fre.data(), fim.data());
        return std::make_pair(std::move(fre), std::move(fim));
    };
    std::vector<std::pair<std::vector<double>, std::vector<double>>> ref_spec;
    ref_spec.reserve(nsrc);
    for (const auto& r : references) ref_spec.push_back(transform(r));
    const auto est_spec = transform(estimate);

    // corr(a, b)[delta] = sum_m a[m] * b[m + delta], delta in (-L, L) taken
    // from the circular result (nfft >= n + L so there is no wraparound).
    const auto correlate = [&](const std::pair<std::vector<double>, std::vector<double>>& fa,
                               const std::pair<std::vector<double>, std::vector<double>>& fb) {
        std::vector<double> pre(static_cast<std::size_t>(nfft)), pim(static_cast<std::size_t>(nfft));
        for (std::int64_t i = 0; i < nfft; ++i) {
            // conj(Fa) * Fb
            const double ar = fa.first[static_cast<std::size_t>(i)];
            const double ai = -fa.second[static_cast<std::size_t>(i)];
            const double br = fb.first[static_cast<std::size_t>(i)];
            const double bi = fb.second[static_cast<std::size_t>(i)];
            pre[static_cast<std::size_t>(i)] = ar * br - ai * bi;
            pim[static_cast<std::size_t>(i)] = ar * bi + ai * br;
        }
        std::vector<double> cre(static_cast<std::size_t>(nfft)), cim(static_cast<std::size_t>(nfft));
        fft.inverse(pre.data(), pim.data(), cre.data(), cim.data());
        return cre;
    };

    // G[(j,l),(j',l')] = corr(s_j, s_j')[l - l']
    std::vector<std::vector<std::vector<double>>> corr(nsrc);
    for (std::size_t j = 0; j < nsrc; ++j) {
        corr[j].resize(nsrc);
        for (std::size_t j2 = 0; j2 < nsrc; ++j2) corr[j][j2] = correlate(ref_spec[j], ref_spec[j2]);
    }
    std::vector<std::vector<double>> rhs_corr(nsrc);
    for (std::size_t j = 0; j < nsrc; ++j) rhs_corr[j] = correlate(ref_spec[j], est_spec);

    const auto corr_at = [&](const std::vector<double>& c, std::int64_t delta) {
        return delta >= 0 ? c[static_cast<std::size_t>(delta)]
                          : c[static_cast<std::size_t>(nfft + delta)];
    };

    const std::size_t dim = nsrc * L;
    std::vector<double> gram(dim * dim);
    std::vector<double> rhs(dim);
    for (std::size_t j = 0; j < nsrc; ++j) {
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t rowidx = j * L + l;
            rhs[rowidx] = corr_at(rhs_corr[j], static_cast<std::int64_t>(l));
            for (std::size_t j2 = 0; j2 < nsrc; ++j2) {
                for (std::size_t l2 = 0; l2 < L; ++l2) {
                    gram[rowidx * dim + j2 * L + l2] =
                        corr_at(corr[j][j2],
                                static_cast<std::int64_t>(l) - static_cast<std::int64_t>(l2));
                }
            }
        }
    }

    // target-only projection
    std::vector<double> gram_t(L * L);
    std::vector<double> rhs_t(L);
    for (std::size_t l = 0; l < L; ++l) {
        rhs_t[l] = rhs[target_idx * L + l];
        for (std::size_t l2 = 0; l2 < L; ++l2)
            gram_t[l * L + l2] = gram[(target_idx * L + l) * dim + target_idx * L + l2];
    }
    const auto coef_t = solve_gram(std::move(gram_t), std::move(rhs_t), L);
    const auto coef_all = solve_gram(std::move(gram), std::move(rhs), dim);

    // FIR-filter the references with the fitted taps, truncated to n.
    const auto filter_into = [&](const std::vector<double>& src, const double* taps,
                                 std::vector<double>& acc) {
        for (std::size_t l = 0; l < L; ++l) {
            const double a = taps[l];
            if (a == 0.0) continue;
            kernels::active().axpy(a, src.data(), acc.data() + l, n - l);
        }
    };
    std::vector<double> s_target(n, 0.0), p_all(n, 0.0);
    filter_into(references[target_idx], coef_t.data(), s_target);
    for (std::size_t j = 0; j < nsrc; ++j) filter_into(references[j], coef_all.data() + j * L, p_all);

    BssDecomposition d;
    d.filter_len = filter_len;
    d.s_target = std::move(s_target);
    d.e_interf.resize(n);
    d.e_artif.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.e_interf[i] = p_all[i] - d.s_target[i];
        d.e_artif[i] = estimate[i] - p_all[i];
    }
    const double est_energy = kernels::active().dot(estimate.data(), estimate.data(), n);
    d.target_degenerate = energy(d.s_target) <= 1e-20 * est_energy;
    return d;
}

double sdr_db(const BssDecomposition& d) {
    std::vector<double> noise(d.e_interf.size());
    kernels::active().add(d.e_interf.data(), d.e_artif.data(), noise.data(), noise.size());
    return capped_ratio_db(energy(d.s_target), energy(noise));
}

double sir_db(const BssDecomposition& d) {
    return capped_ratio_db(energy(d.s_target), energy(d.e_interf));
}

double sar_db(const BssDecomposition& d) {
    std::vector<double> kept(d.s_target.size());
    kernels::active().add(d.s_target.data(), d.e_interf.data(), kept.data(), kept.size());
    return capped_ratio_db(energy(kept), energy(d.e_artif));
}

BssScores evaluate_estimate(const std::vector<double>& estimate,
                            const std::vector<std::vector<double>>& references,
                            std::size_t target_idx, int filter_len) {
    const auto d = bss_decompose(estimate, references, target_idx, filter_len);
    return {sdr_db(d), sir_db(d), sar_db(d)};
}

}  // namespace contsep::metrics
