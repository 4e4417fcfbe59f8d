#pragma once

// JSON forms of fits, content digests and the provenance block shared by every artifact.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "capcurve/error.hpp"
#include "capcurve/fitting.hpp"

namespace capcurve {

inline constexpr const char* kToolName = "capcurve";
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) == 1, ErrorKind::Precondition,
          "sha256 failed");
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::EmptyInput, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct InputDigest {
  std::string role;  // "runs", "models", ...
  std::string file;  // base name only, so artifacts do not depend on the working directory
  std::string sha256;
};

inline InputDigest digest_file(std::string role, const std::filesystem::path& path) {
  return {std::move(role), path.filename().string(), sha256_hex(read_file(path))};
}

struct Provenance {
  std::uint64_t seed = 0;
  std::vector<InputDigest> inputs;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["seed"] = seed;
    j["inputs"] = nlohmann::json::array();
    for (const auto& d : inputs) j["inputs"].push_back({{"role", d.role}, {"file", d.file}, {"sha256", d.sha256}});
    return j;
  }

  /// One-line form for the leading comment of CSV artifacts.
  std::string comment_line() const {
    std::string s = "# " + std::string(kToolName) + ' ' + kToolVersion + " seed=" + std::to_string(seed);
    for (const auto& d : inputs) s += ' ' + d.role + '=' + d.file + ':' + d.sha256;
    return s;
  }
};

// ---------------------------------------------------------------------------
// GrowthFit <-> JSON

inline nlohmann::json to_json(const GrowthFit& fit) {
  nlohmann::json j;
  j["spec"] = spec_id(fit.spec);
  j["name"] = spec_name(fit.spec);
  j["kind"] = to_string(fit.kind);
  j["objective"] = fit.objective;
  j["gradient_norm"] = fit.gradient_norm;
  j["converged"] = fit.converged;
  j["seed"] = fit.seed;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GrowthParams>) {
          j["link"] = to_string(p.link);
          j["params"] = {{"gamma1", p.gamma1}, {"gamma2", p.gamma2}, {"base", p.base}, {"reasoning", p.reasoning}};
          if (p.spline) j["params"]["spline"] = {{"degree", p.spline->degree}, {"knots", p.spline->knots}};
        } else if constexpr (std::is_same_v<P, SingleSigmoidParams>) {
          j["params"] = {{"gamma", p.gamma}, {"delta1", p.delta1}, {"delta2", p.delta2}};
        } else {
          j["params"] = {{"beta0", p.beta0}, {"beta1", p.beta1}};
        }
      },
      fit.params);
  if (!fit.per_model_beta.empty()) j["per_model_beta"] = fit.per_model_beta;
  if (fit.spline_tau) j["spline_tau"] = {{"base", fit.spline_tau->base}, {"reasoning", fit.spline_tau->reasoning}};
  return j;
}

inline GrowthFit fit_from_json(const nlohmann::json& j) {
  try {
    GrowthFit fit;
    const auto id = j.at("spec").get<std::string>();
    const auto spec = parse_spec_id(id);
    require(spec.has_value(), ErrorKind::Precondition, "unknown specification '" + id + "'");
    fit.spec = *spec;
    fit.objective = j.value("objective", 0.0);
    fit.gradient_norm = j.value("gradient_norm", 0.0);
    fit.converged = j.value("converged", false);
    fit.seed = j.value("seed", std::uint64_t{0});
    const auto& p = j.at("params");
    switch (fit.spec) {
      case Specification::MetrExponential:
        fit.kind = FitKind::OlsLog;
        fit.params = ExpTrendParams{p.at("beta0").get<double>(), p.at("beta1").get<double>()};
        break;
      case Specification::SigmoidCurve:
        fit.kind = FitKind::MseSigmoid;
        fit.params = SingleSigmoidParams{p.at("gamma").get<double>(), p.at("delta1").get<double>(), p.at("delta2").get<double>()};
        break;
      default: {
        fit.kind = FitKind::MapJoint;
        GrowthParams g;
        g.link = *link_of(fit.spec);
        g.gamma1 = p.at("gamma1").get<double>();
        g.gamma2 = p.at("gamma2").get<double>();
        g.base = p.at("base").get<std::vector<double>>();
        g.reasoning = p.at("reasoning").get<std::vector<double>>();
        if (p.contains("spline")) {
          SplineSpec s;
          s.degree = p["spline"].at("degree").get<int>();
          s.knots = p["spline"].at("knots").get<std::vector<double>>();
          g.spline = s;
        }
        g.validate();
        fit.params = std::move(g);
        if (j.contains("per_model_beta")) fit.per_model_beta = j["per_model_beta"].get<std::map<std::string, double>>();
        if (j.contains("spline_tau"))
          fit.spline_tau = SplineScales{j["spline_tau"].at("base").get<double>(), j["spline_tau"].at("reasoning").get<double>()};
      }
    }
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Precondition, std::string("malformed fit record: ") + e.what());
  }
}

/// Reads the `fits` array of a fits.json document.
inline std::vector<GrowthFit> parse_fits(const std::string& text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  require(!doc.is_discarded() && doc.is_object() && doc.contains("fits"), ErrorKind::Precondition, "not a fits document");
  std::vector<GrowthFit> out;
  for (const auto& f : doc["fits"]) out.push_back(fit_from_json(f));
  return out;
}

}  // namespace capcurve
