#include "elicit/usermodel.hpp"

#include "elicit/errors.hpp"
#include "json_codec.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace elicit {
namespace {

constexpr std::uint8_t kAnswered = 1;
constexpr std::uint8_t kPending = 2;

} // namespace

void UserModelParams::validate() const {
    if (!(b > 0.0 && b < 1.0)) throw ContractError("user model: b must lie in (0,1)");
    if (!(lambda > 0.0)) throw ContractError("user model: lambda must be positive");
    if (!(alpha >= 0.0)) throw ContractError("user model: alpha must be non-negative");
    if (!(delta > 0.0 && delta < 1.0)) throw ContractError("user model: delta must lie in (0,1)");
    if (!(beta >= 0.0)) throw ContractError("user model: beta must be non-negative");
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double exploration_rho(double alpha, int t, std::size_t num_features, double delta) {
    if (t < 1) throw ContractError("exploration_rho: t must be >= 1");
    return std::sqrt(alpha * std::log(2.0 * t * static_cast<double>(num_features) / delta));
}

UserModel::UserModel(std::shared_ptr<const DescriptorMatrix> descriptors, UserModelParams params)
    : descriptors_(std::move(descriptors)), params_(params) {
    if (!descriptors_ || descriptors_->Z.rows() == 0 || descriptors_->Z.cols() == 0)
        throw ContractError("user model: empty descriptor matrix");
    if (!descriptors_->Z.allFinite()) throw ContractError("user model: non-finite descriptors");
    params_.validate();
    r0_ = Eigen::VectorXd::Constant(descriptors_->Z.rows(), params_.b);
    queried_.assign(static_cast<std::size_t>(descriptors_->Z.rows()), 0);
}

UserModel UserModel::init_with_pseudo(std::shared_ptr<const DescriptorMatrix> descriptors,
                                      const Eigen::VectorXd& w_hat, UserModelParams params) {
    UserModel um(std::move(descriptors), params);
    if (w_hat.size() != um.r0_.size()) throw ContractError("init_with_pseudo: w_hat has wrong length");
    if (!w_hat.allFinite()) throw ContractError("init_with_pseudo: non-finite weights");
    const double scale = w_hat.cwiseAbs().maxCoeff();
    if (scale > 0.0) um.r0_ = (params.b + 0.5 * w_hat.array() / scale).matrix();
    return um;
}

RelevanceEstimate UserModel::estimate(int t) const {
    const Eigen::MatrixXd& Z = descriptors_->Z;
    const auto nz = Z.cols();
    const double b = params_.b;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nz, nz);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nz);
    for (const auto& f : feedback_) {
        const auto zj = Z.row(static_cast<Eigen::Index>(f.feature)).transpose();
        gram.noalias() += zj * zj.transpose();
        rhs += zj * (static_cast<double>(f.response) - b);
    }
    if (params_.beta > 0.0) {
        gram.noalias() += params_.beta * (Z.transpose() * Z);
        rhs.noalias() += params_.beta * (Z.transpose() * (r0_.array() - b).matrix());
    }
    gram.diagonal().array() += params_.lambda;

    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("user model: Gram matrix is not positive definite");

    RelevanceEstimate est;
    est.rho = exploration_rho(params_.alpha, t, num_features(), params_.delta);
    est.v_hat = llt.solve(rhs);
    est.r_hat = (Z * est.v_hat).array() + b;
    // Z_j' G^{-1} Z_j = |L^{-1} Z_j|^2
    const Eigen::MatrixXd half = llt.matrixL().solve(Z.transpose());
    est.c = est.rho * half.colwise().norm().transpose();
    est.ucb = est.r_hat + est.c;
    const double shift = std::log(b / (1.0 - b)) - b;
    est.r_hat_unit = est.r_hat.unaryExpr([shift](double r) { return logistic(r + shift); });
    return est;
}

std::vector<std::size_t> UserModel::select(const RelevanceEstimate& estimate, std::size_t n) const {
    if (static_cast<std::size_t>(estimate.ucb.size()) != num_features())
        throw ContractError("select: estimate does not match the model");
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < num_features(); ++j)
        if (queried_[j] == 0) pool.push_back(j);
    const auto take = std::min(n, pool.size());
    const auto& ucb = estimate.ucb;
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                      [&](std::size_t x, std::size_t y) {
                          const double ux = ucb(static_cast<Eigen::Index>(x)), uy = ucb(static_cast<Eigen::Index>(y));
                          return ux != uy ? ux > uy : x < y;
                      });
    pool.resize(take);
    return pool;
}

void UserModel::begin_query(std::span<const std::size_t> ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto j = ids[i];
        if (j >= num_features()) throw ContractError("begin_query: feature id out of range");
        if (queried_[j] != 0 || std::find(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i), j) != ids.begin() + static_cast<std::ptrdiff_t>(i))
            throw ContractError("begin_query: feature " + std::to_string(j) + " was already queried");
    }
    for (auto j : ids) queried_[j] = kPending;
}

void UserModel::record(std::span<const FeedbackEntry> responses) {
    std::vector<std::uint8_t> seen(num_features(), 0);
    for (const auto& r : responses) {
        if (r.feature >= num_features()) throw ContractError("record: feature id out of range");
        if (r.response != 0 && r.response != 1) throw ContractError("record: responses must be 0 or 1");
        if (seen[r.feature]) throw ContractError("record: duplicate response for feature " + std::to_string(r.feature));
        seen[r.feature] = 1;
        if (queried_[r.feature] == kAnswered)
            throw ContractError("record: feature " + std::to_string(r.feature) + " was already answered");
        if (queried_[r.feature] != kPending)
            throw ContractError("record: feature " + std::to_string(r.feature) + " was never queried");
    }
    for (const auto& r : responses) {
        feedback_.push_back(r);
        queried_[r.feature] = kAnswered;
    }
}

std::size_t UserModel::num_unqueried() const {
    return static_cast<std::size_t>(std::count(queried_.begin(), queried_.end(), std::uint8_t{0}));
}

std::vector<std::size_t> UserModel::pending() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < queried_.size(); ++j)
        if (queried_[j] == kPending) out.push_back(j);
    return out;
}

std::string UserModel::snapshot() const {
    Json feedback = Json::array();
    for (const auto& f : feedback_) feedback.push_back(Json::array({f.feature, f.response, f.iteration}));
    Json j{{"format", "elicit-user-model"},
           {"version", 1},
           {"params", params_},
           {"num_features", num_features()},
           {"r0", std::vector<double>(r0_.data(), r0_.data() + r0_.size())},
           {"feedback", feedback},
           {"pending", pending()}};
    return j.dump();
}

UserModel UserModel::restore(std::string_view record, std::shared_ptr<const DescriptorMatrix> descriptors) {
    const Json j = parse_record(record, "user model");
    check_header(j, "elicit-user-model", 1);
    try {
        UserModel um(std::move(descriptors), j.at("params").get<UserModelParams>());
        const auto r0 = j.at("r0").get<std::vector<double>>();
        if (j.at("num_features").get<std::size_t>() != um.num_features() || r0.size() != um.num_features())
            throw FormatError("user model: record does not match the descriptor matrix");
        um.r0_ = Eigen::Map<const Eigen::VectorXd>(r0.data(), static_cast<Eigen::Index>(r0.size()));
        for (const auto& f : j.at("feedback")) {
            const FeedbackEntry e{f.at(0).get<std::size_t>(), f.at(1).get<int>(), f.at(2).get<int>()};
            const std::size_t ids[] = {e.feature};
            um.begin_query(ids);
            um.record(std::span<const FeedbackEntry>(&e, 1));
        }
        um.begin_query(j.at("pending").get<std::vector<std::size_t>>());
        return um;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("user model: corrupt record (") + e.what() + ")");
    } catch (const ContractError& e) {
        throw FormatError(std::string("user model: inconsistent record (") + e.what() + ")");
    }
}

} // namespace elicit
