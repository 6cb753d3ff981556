#include "elicit/prediction.hpp"

#include "elicit/errors.hpp"
#include "elicit/rng.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace elicit {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTargetAccept = 0.44;
constexpr double kLog2 = std::numbers::ln2;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
// a - 1 ~ half-N(0, 12.5 pi): mean of a is 1 + sqrt(12.5 pi * 2 / pi) = 6.
const double kAPriorVar = 12.5 * std::numbers::pi;

double log_prior_a(double a) {
    if (!(a > 1.0)) return kNegInf;
    const double d = a - 1.0;
    return kLog2 - 0.5 * std::log(2.0 * std::numbers::pi * kAPriorVar) - d * d / (2.0 * kAPriorVar);
}

double log_prior_xi(double xi) {
    if (!(xi > 0.0 && xi < 1.0)) return kNegInf;
    return std::log(9.0) + 8.0 * std::log1p(-xi);
}

double log_prior_sigma(double sigma) {
    if (!(sigma > 0.0)) return kNegInf;
    return kLog2 - 0.5 * kLog2Pi - 0.5 * sigma * sigma;
}

// log p(w | a, xi) from the sufficient statistics of the two weight groups.
double log_prior_w(double a, double xi, std::size_t n_minus, std::size_t n_plus, double ss_minus,
                   double ss_plus) {
    const double s0 = sigma0_sq(xi, a, n_minus, n_plus);
    const double nm = static_cast<double>(n_minus), np = static_cast<double>(n_plus);
    return -0.5 * nm * (kLog2Pi + std::log(s0)) - ss_minus / (2.0 * s0) +
           np * (kLog2 - 0.5 * (kLog2Pi + std::log(a * s0))) - ss_plus / (2.0 * a * s0);
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Random-walk proposal scale with windowed Robbins-Monro style adaptation.
struct Proposal {
    double log_scale = 0.0;
    long proposed = 0;
    long accepted = 0;
    long window_proposed = 0;
    long window_accepted = 0;

    double scale() const { return std::exp(log_scale); }
    void record(bool ok) {
        ++proposed;
        ++window_proposed;
        if (ok) { ++accepted; ++window_accepted; }
    }
    void adapt(double gain) {
        if (window_proposed > 0) {
            const double rate = static_cast<double>(window_accepted) / static_cast<double>(window_proposed);
            log_scale = std::clamp(log_scale + gain * (rate - kTargetAccept), -25.0, 5.0);
        }
        window_proposed = window_accepted = 0;
    }
    double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

class Sampler {
public:
    Sampler(const Dataset& train, const RelevanceVector& r, const SamplerConfig& cfg, std::uint64_t seed)
        : r_(r), cfg_(cfg), rng_(make_rng(seed, "posterior")),
          n_(static_cast<Eigen::Index>(train.num_samples())),
          k_(static_cast<Eigen::Index>(train.num_features())), y_(train.y) {
        n_plus_ = r.n_plus();
        n_minus_ = r.n_minus();
        col_start_.reserve(static_cast<std::size_t>(k_) + 1);
        col_start_.push_back(0);
        col_sq_ = Eigen::VectorXd::Zero(k_);
        for (Eigen::Index j = 0; j < k_; ++j) {
            for (Eigen::Index i = 0; i < n_; ++i) {
                const double v = train.X(i, j);
                if (v == 0.0) continue;
                rows_.push_back(static_cast<int>(i));
                vals_.push_back(v);
                col_sq_(j) += v * v;
            }
            col_start_.push_back(rows_.size());
        }

        a_ = cfg.fixed_a.value_or(6.0);
        xi_ = cfg.fixed_xi.value_or(0.1);
        sigma_ = cfg.fixed_sigma.value_or(1.0);
        if (!(a_ > 1.0) || !(xi_ > 0.0 && xi_ < 1.0) || !(sigma_ > 0.0))
            throw ContractError("sample_posterior: pinned parameter outside its support");
        w_ = Eigen::VectorXd::Zero(k_);
        refresh();
        if (!std::isfinite(total_log_density()))
            throw NumericalError("sample_posterior: initial state has non-finite density");

        const double s0 = sigma0_sq(xi_, a_, n_minus_, n_plus_);
        w_prop_.resize(static_cast<std::size_t>(k_));
        for (Eigen::Index j = 0; j < k_; ++j) {
            const double v = r_[static_cast<std::size_t>(j)] ? a_ * s0 : s0;
            const double precision = col_sq_(j) / (sigma_ * sigma_) + 1.0 / v;
            w_prop_[static_cast<std::size_t>(j)].log_scale = std::log(2.4 / std::sqrt(precision));
        }
        a_prop_.log_scale = a_joint_.log_scale = std::log(0.5);
        xi_prop_.log_scale = xi_joint_.log_scale = std::log(0.5);
        sigma_prop_.log_scale = std::log(0.2);
    }

    PosteriorChain run(std::uint64_t seed) {
        PosteriorChain chain;
        chain.seed = seed;
        chain.burn_in = cfg_.burn_in;
        chain.config = cfg_;
        chain.samples.reserve(static_cast<std::size_t>((cfg_.iterations - cfg_.burn_in) / cfg_.thin + 1));
        int window = 0;
        for (int it = 0; it < cfg_.iterations; ++it) {
            refresh();
            for (Eigen::Index j = 0; j < k_; ++j) update_weight(j);
            if (!cfg_.fixed_a) { update_a(); update_a_joint(); }
            if (!cfg_.fixed_xi) { update_xi(); update_xi_joint(); }
            if (!cfg_.fixed_sigma) update_sigma();

            if (it < cfg_.burn_in && (it + 1) % cfg_.adapt_interval == 0) {
                ++window;
                const double gain = 1.0 / std::sqrt(static_cast<double>(window));
                for (auto& p : w_prop_) p.adapt(gain);
                for (auto* p : {&a_prop_, &a_joint_, &xi_prop_, &xi_joint_, &sigma_prop_}) p->adapt(gain);
            }
            if (it >= cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0)
                chain.samples.push_back(ModelParams{w_, a_, xi_, sigma_});
        }
        long wp = 0, wa = 0;
        for (const auto& p : w_prop_) { wp += p.proposed; wa += p.accepted; }
        chain.diagnostics.accept_w = wp ? static_cast<double>(wa) / static_cast<double>(wp) : 0.0;
        chain.diagnostics.accept_a = a_prop_.rate();
        chain.diagnostics.accept_xi = xi_prop_.rate();
        chain.diagnostics.accept_sigma = sigma_prop_.rate();
        return chain;
    }

private:
    bool accept(double log_ratio) {
        if (log_ratio >= 0.0) return true;
        return std::log(uniform01(rng_)) < log_ratio;
    }

    // Recomputes residuals and group statistics from w to keep rounding drift bounded.
    void refresh() {
        resid_ = y_;
        fit_plus_ = Eigen::VectorXd::Zero(n_);
        ss_minus_ = ss_plus_ = 0.0;
        for (Eigen::Index j = 0; j < k_; ++j) {
            const double wj = w_(j);
            const bool rel = r_[static_cast<std::size_t>(j)];
            (rel ? ss_plus_ : ss_minus_) += wj * wj;
            if (wj == 0.0) continue;
            for (auto p = col_start_[static_cast<std::size_t>(j)]; p < col_start_[static_cast<std::size_t>(j) + 1]; ++p) {
                resid_(rows_[p]) -= vals_[p] * wj;
                if (rel) fit_plus_(rows_[p]) += vals_[p] * wj;
            }
        }
    }

    double log_lik(double ssr, double sigma) const {
        return -static_cast<double>(n_) * std::log(sigma) - ssr / (2.0 * sigma * sigma);
    }

    double total_log_density() const {
        return log_lik(resid_.squaredNorm(), sigma_) - 0.5 * static_cast<double>(n_) * kLog2Pi +
               log_prior_w(a_, xi_, n_minus_, n_plus_, ss_minus_, ss_plus_) + log_prior_a(a_) +
               log_prior_xi(xi_) + log_prior_sigma(sigma_);
    }

    void update_weight(Eigen::Index j) {
        auto& prop = w_prop_[static_cast<std::size_t>(j)];
        const bool rel = r_[static_cast<std::size_t>(j)];
        const double old = w_(j);
        const double step = prop.scale() * standard_normal(rng_);
        const double proposed = old + step;
        if (rel && proposed < 0.0) { prop.record(false); return; }

        const auto begin = col_start_[static_cast<std::size_t>(j)], end = col_start_[static_cast<std::size_t>(j) + 1];
        double dot = 0.0;
        for (auto p = begin; p < end; ++p) dot += vals_[p] * resid_(rows_[p]);
        const double s0 = sigma0_sq(xi_, a_, n_minus_, n_plus_);
        const double var = rel ? a_ * s0 : s0;
        const double sig2 = sigma_ * sigma_;
        const double log_ratio = (2.0 * step * dot - step * step * col_sq_(j)) / (2.0 * sig2) -
                                 (proposed * proposed - old * old) / (2.0 * var);
        const bool ok = accept(log_ratio);
        prop.record(ok);
        if (!ok) return;
        w_(j) = proposed;
        for (auto p = begin; p < end; ++p) {
            resid_(rows_[p]) -= vals_[p] * step;
            if (rel) fit_plus_(rows_[p]) += vals_[p] * step;
        }
        (rel ? ss_plus_ : ss_minus_) += proposed * proposed - old * old;
    }

    double hyper_log_density(double a, double xi) const {
        return log_prior_w(a, xi, n_minus_, n_plus_, ss_minus_, ss_plus_) + log_prior_a(a) + log_prior_xi(xi);
    }

    void update_a() {
        const double a_new = 1.0 + std::exp(std::log(a_ - 1.0) + a_prop_.scale() * standard_normal(rng_));
        if (!(a_new > 1.0) || !std::isfinite(a_new)) { a_prop_.record(false); return; }
        const double log_ratio = hyper_log_density(a_new, xi_) - hyper_log_density(a_, xi_) +
                                 std::log(a_new - 1.0) - std::log(a_ - 1.0);
        const bool ok = accept(log_ratio);
        a_prop_.record(ok);
        if (ok) a_ = a_new;
    }

    // Moves (c_minus w_minus, c_plus w_plus) with the prior variances so that w / sd stays fixed;
    // the prior and Jacobian terms cancel and only likelihood and hyperprior remain.
    bool try_rescale(double c_minus, double c_plus, double log_hyper_ratio, Proposal& prop) {
        Eigen::VectorXd fit_minus = y_ - resid_ - fit_plus_;
        Eigen::VectorXd resid_new = y_ - c_minus * fit_minus - c_plus * fit_plus_;
        const double log_ratio = log_lik(resid_new.squaredNorm(), sigma_) -
                                 log_lik(resid_.squaredNorm(), sigma_) + log_hyper_ratio;
        const bool ok = std::isfinite(log_ratio) && accept(log_ratio);
        prop.record(ok);
        if (!ok) return false;
        for (Eigen::Index j = 0; j < k_; ++j) w_(j) *= r_[static_cast<std::size_t>(j)] ? c_plus : c_minus;
        fit_plus_ *= c_plus;
        resid_ = std::move(resid_new);
        ss_minus_ *= c_minus * c_minus;
        ss_plus_ *= c_plus * c_plus;
        return true;
    }

    void update_a_joint() {
        const double a_new = 1.0 + std::exp(std::log(a_ - 1.0) + a_joint_.scale() * standard_normal(rng_));
        if (!(a_new > 1.0) || !std::isfinite(a_new)) { a_joint_.record(false); return; }
        const double s0 = sigma0_sq(xi_, a_, n_minus_, n_plus_);
        const double s0_new = sigma0_sq(xi_, a_new, n_minus_, n_plus_);
        const double c_minus = std::sqrt(s0_new / s0);
        const double c_plus = std::sqrt(a_new * s0_new / (a_ * s0));
        const double log_hyper = log_prior_a(a_new) - log_prior_a(a_) + std::log(a_new - 1.0) - std::log(a_ - 1.0);
        if (try_rescale(c_minus, c_plus, log_hyper, a_joint_)) a_ = a_new;
    }

    double propose_xi(Proposal& prop) {
        return inv_logit(logit(xi_) + prop.scale() * standard_normal(rng_));
    }

    double xi_jacobian(double xi_new) const {
        return std::log(xi_new) + std::log1p(-xi_new) - std::log(xi_) - std::log1p(-xi_);
    }

    void update_xi() {
        const double xi_new = propose_xi(xi_prop_);
        if (!(xi_new > 0.0 && xi_new < 1.0)) { xi_prop_.record(false); return; }
        const double log_ratio = hyper_log_density(a_, xi_new) - hyper_log_density(a_, xi_) + xi_jacobian(xi_new);
        const bool ok = accept(log_ratio);
        xi_prop_.record(ok);
        if (ok) xi_ = xi_new;
    }

    void update_xi_joint() {
        const double xi_new = propose_xi(xi_joint_);
        if (!(xi_new > 0.0 && xi_new < 1.0)) { xi_joint_.record(false); return; }
        const double c = std::sqrt(xi_new / xi_);
        const double log_hyper = log_prior_xi(xi_new) - log_prior_xi(xi_) + xi_jacobian(xi_new);
        if (try_rescale(c, c, log_hyper, xi_joint_)) xi_ = xi_new;
    }

    void update_sigma() {
        const double sigma_new = std::exp(std::log(sigma_) + sigma_prop_.scale() * standard_normal(rng_));
        if (!(sigma_new > 0.0) || !std::isfinite(sigma_new)) { sigma_prop_.record(false); return; }
        const double ssr = resid_.squaredNorm();
        const double log_ratio = log_lik(ssr, sigma_new) - log_lik(ssr, sigma_) + log_prior_sigma(sigma_new) -
                                 log_prior_sigma(sigma_) + std::log(sigma_new) - std::log(sigma_);
        const bool ok = accept(log_ratio);
        sigma_prop_.record(ok);
        if (ok) sigma_ = sigma_new;
    }

    const RelevanceVector& r_;
    SamplerConfig cfg_;
    Rng rng_;
    Eigen::Index n_;
    Eigen::Index k_;
    Eigen::VectorXd y_;
    std::size_t n_plus_ = 0;
    std::size_t n_minus_ = 0;

    // X in compressed-column form.
    std::vector<std::size_t> col_start_;
    std::vector<int> rows_;
    std::vector<double> vals_;
    Eigen::VectorXd col_sq_;

    Eigen::VectorXd w_;
    double a_ = 6.0, xi_ = 0.1, sigma_ = 1.0;
    Eigen::VectorXd resid_;
    Eigen::VectorXd fit_plus_;
    double ss_minus_ = 0.0, ss_plus_ = 0.0;

    std::vector<Proposal> w_prop_;
    Proposal a_prop_, a_joint_, xi_prop_, xi_joint_, sigma_prop_;
};

void check_shapes(const Dataset& data) {
    if (data.X.rows() != data.y.size() || data.X.cols() != static_cast<Eigen::Index>(data.num_features()))
        throw ContractError("dataset shape mismatch");
    if (!data.y.allFinite() || !data.X.allFinite()) throw ContractError("non-finite data");
}

} // namespace

std::size_t RelevanceVector::n_plus() const {
    return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> RelevanceVector::relevant_ids() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < flags_.size(); ++j)
        if (flags_[j]) out.push_back(j);
    return out;
}

std::size_t PosteriorChain::num_features() const {
    return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().w.size());
}

Eigen::VectorXd PosteriorChain::mean_w() const {
    if (samples.empty()) throw StateError("posterior chain has no retained samples");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(samples.front().w.size());
    for (const auto& s : samples) sum += s.w;
    return sum / static_cast<double>(samples.size());
}

double sigma0_sq(double xi, double a, std::size_t n_minus, std::size_t n_plus) {
    const double denom = static_cast<double>(n_minus) + a * static_cast<double>(n_plus);
    if (!(denom > 0.0)) throw ContractError("sigma0_sq: zero denominator");
    return xi / denom;
}

double log_posterior(const ModelParams& params, const Dataset& train, const RelevanceVector& r) {
    check_shapes(train);
    const auto k = train.num_features();
    if (static_cast<std::size_t>(params.w.size()) != k || r.size() != k)
        throw ContractError("log_posterior: dimension mismatch");
    if (!(params.a > 1.0) || !(params.xi > 0.0 && params.xi < 1.0) || !(params.sigma > 0.0))
        return kNegInf;
    double ss_minus = 0.0, ss_plus = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double wj = params.w(static_cast<Eigen::Index>(j));
        if (r[j]) {
            if (wj < 0.0) return kNegInf;
            ss_plus += wj * wj;
        } else {
            ss_minus += wj * wj;
        }
    }
    const double ssr = (train.y - train.X * params.w).squaredNorm();
    const double n = static_cast<double>(train.num_samples());
    const double loglik = -0.5 * n * kLog2Pi - n * std::log(params.sigma) - ssr / (2.0 * params.sigma * params.sigma);
    return loglik + log_prior_w(params.a, params.xi, r.n_minus(), r.n_plus(), ss_minus, ss_plus) +
           log_prior_a(params.a) + log_prior_xi(params.xi) + log_prior_sigma(params.sigma);
}

PosteriorChain sample_posterior(const Dataset& train, const RelevanceVector& r, const SamplerConfig& config,
                                std::uint64_t seed) {
    check_shapes(train);
    if (r.size() != train.num_features()) throw ContractError("sample_posterior: relevance length mismatch");
    if (train.num_features() == 0) throw ContractError("sample_posterior: no features");
    if (config.iterations <= config.burn_in || config.burn_in < 0 || config.thin < 1 || config.adapt_interval < 1)
        throw ContractError("sample_posterior: invalid sample counts");
    Sampler sampler(train, r, config, seed);
    return sampler.run(seed);
}

double predict(const PosteriorChain& chain, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (static_cast<std::size_t>(x.size()) != chain.num_features())
        throw ContractError("predict: feature vector has wrong length");
    return x.dot(chain.mean_w());
}

Eigen::VectorXd predict_all(const PosteriorChain& chain, const Dataset& data) {
    if (data.num_features() != chain.num_features()) throw ContractError("predict: dimension mismatch");
    return data.X * chain.mean_w();
}

double evaluate_mse(const PosteriorChain& chain, const Dataset& test) {
    if (test.num_samples() == 0) throw ContractError("evaluate_mse: empty test set");
    return (test.y - predict_all(chain, test)).squaredNorm() / static_cast<double>(test.num_samples());
}

Eigen::VectorXd ridge_oracle(const Dataset& train, double sigma0_sq, double sigma_sq) {
    if (!(sigma0_sq > 0.0) || !(sigma_sq > 0.0)) throw ContractError("ridge_oracle: variances must be positive");
    check_shapes(train);
    Eigen::MatrixXd gram = train.X.transpose() * train.X;
    gram.diagonal().array() += sigma_sq / sigma0_sq;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge_oracle: system is not positive definite");
    return llt.solve(train.X.transpose() * train.y);
}

} // namespace elicit
