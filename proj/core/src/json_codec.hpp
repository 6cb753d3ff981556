#pragma once

// nlohmann/json conversions shared by the persistence code; not installed.

#include "elicit/errors.hpp"
#include "elicit/prediction.hpp"
#include "elicit/usermodel.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace elicit {

using Json = nlohmann::json;

inline void to_json(Json& j, const UserModelParams& p) {
    j = Json{{"b", p.b}, {"lambda", p.lambda}, {"alpha", p.alpha}, {"delta", p.delta}, {"beta", p.beta}};
}

inline void from_json(const Json& j, UserModelParams& p) {
    p.b = j.at("b").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.delta = j.at("delta").get<double>();
    p.beta = j.at("beta").get<double>();
}

inline Json optional_to_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> optional_from_json(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline void to_json(Json& j, const SamplerConfig& c) {
    j = Json{{"iterations", c.iterations},
             {"burn_in", c.burn_in},
             {"thin", c.thin},
             {"adapt_interval", c.adapt_interval},
             {"fixed_a", optional_to_json(c.fixed_a)},
             {"fixed_xi", optional_to_json(c.fixed_xi)},
             {"fixed_sigma", optional_to_json(c.fixed_sigma)}};
}

inline void from_json(const Json& j, SamplerConfig& c) {
    c.iterations = j.at("iterations").get<int>();
    c.burn_in = j.at("burn_in").get<int>();
    c.thin = j.at("thin").get<int>();
    c.adapt_interval = j.at("adapt_interval").get<int>();
    c.fixed_a = optional_from_json(j.at("fixed_a"));
    c.fixed_xi = optional_from_json(j.at("fixed_xi"));
    c.fixed_sigma = optional_from_json(j.at("fixed_sigma"));
}

/// Parses `text`, converting library exceptions to FormatError tagged with `what`.
inline Json parse_record(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::exception& e) {
        throw FormatError(std::string(what) + ": corrupt record (" + e.what() + ")");
    }
}

/// Checks the format tag and version of a persisted record.
inline void check_header(const Json& j, std::string_view format, int version) {
    if (!j.is_object() || !j.contains("format") || j["format"] != format)
        throw FormatError("expected a '" + std::string(format) + "' record");
    if (!j.contains("version") || j["version"] != version)
        throw FormatError("unsupported " + std::string(format) + " version");
}

} // namespace elicit
