#include "exconf/types.hpp"

namespace exconf {

const char* to_string(Method m) {
  switch (m) {
    case Method::classical: return "classical";
    case Method::gpd_simple: return "gpd_simple";
    case Method::gpd_profile: return "gpd_profile";
    case Method::gpd_bootstrap: return "gpd_bootstrap";
    case Method::gpd_delta: return "gpd_delta";
    case Method::gpd_safeprofile: return "gpd_safeprofile";
  }
  return "?";
}

const char* to_string(CiStatus s) {
  switch (s) {
    case CiStatus::ok: return "ok";
    case CiStatus::profile_undefined: return "profile_undefined";
    case CiStatus::delta_unstable: return "delta_unstable";
    case CiStatus::degenerate_input: return "degenerate_input";
  }
  return "?";
}

const char* to_string(CiMethod m) {
  switch (m) {
    case CiMethod::profile: return "profile";
    case CiMethod::bootstrap: return "bootstrap";
    case CiMethod::delta: return "delta";
  }
  return "?";
}

const char* to_string(SplitRule s) {
  return s == SplitRule::bonferroni ? "bonferroni" : "sidak";
}

const char* to_string(Sidedness s) {
  return s == Sidedness::unilateral_upper ? "unilateral_upper" : "bilateral";
}

std::optional<Method> method_from_string(const std::string& name) {
  for (Method m : {Method::classical, Method::gpd_simple, Method::gpd_profile,
                   Method::gpd_bootstrap, Method::gpd_delta,
                   Method::gpd_safeprofile}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::optional<SplitRule> split_from_string(const std::string& name) {
  if (name == "bonferroni") return SplitRule::bonferroni;
  if (name == "sidak") return SplitRule::sidak;
  return std::nullopt;
}

std::optional<Sidedness> sidedness_from_string(const std::string& name) {
  if (name == "unilateral_upper" || name == "unilateral")
    return Sidedness::unilateral_upper;
  if (name == "bilateral") return Sidedness::bilateral;
  return std::nullopt;
}

}  // namespace exconf
