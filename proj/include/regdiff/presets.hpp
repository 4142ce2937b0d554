#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "regdiff/errors.hpp"
#include "regdiff/rng.hpp"

namespace regdiff {

namespace detail {

inline nlohmann::json diag_hessian(std::size_t dim, const std::vector<double>& d) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < dim; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < dim; ++c) row.push_back(r == c ? d[r] : 0.0);
    rows.push_back(row);
  }
  return rows;
}

inline double log_uniform_sigma(std::uint64_t stream) {
  const double u =
      static_cast<double>(splitmix64(stream) >> 11) / 9007199254740992.0;  // [0,1)
  return std::pow(2.0, u);  // log-uniform in [1, 2)
}

inline nlohmann::json fig3_config(std::size_t n_f, std::size_t n_d, std::size_t n_s,
                                  std::size_t dim, std::size_t informative,
                                  std::size_t iterations, std::size_t repetitions) {
  using nlohmann::json;
  const std::size_t n = n_f + n_d + n_s;
  json agents = json::array();
  std::uint64_t noise_stream = 0x5eedu;
  for (std::size_t k = 0; k < n; ++k) {
    json a;
    const bool has_data = k < n_f + n_d;
    const bool has_structure = k < n_f || k >= n_f + n_d;
    a["class"] = k < n_f                ? "fully_informed"
                 : (k < n_f + n_d ? "data_informed" : "structure_informed");
    if (has_data) {
      noise_stream = splitmix64(noise_stream);
      a["risk"] = {{"kind", "logistic_l2"},
                   {"rho2", 0.05},
                   {"sigma_v", log_uniform_sigma(noise_stream)},
                   {"eval_set_size", 20000}};
    } else {
      a["risk"] = {{"kind", "zero"}};
    }
    if (has_structure) {
      // structure knowledge: the tail coordinates carry no class information
      std::vector<std::size_t> mask;
      for (std::size_t i = informative; i < dim; ++i) mask.push_back(i);
      a["regularizer"] = {{"kind", "group_l1"}, {"rho1", 0.3}, {"mask", mask}};
    } else {
      a["regularizer"] = {{"kind", "zero"}};
    }
    agents.push_back(a);
  }
  json j = {
      {"network", {{"n_agents", n}, {"topology", "ring"}, {"rule", "metropolis"}}},
      {"data",
       {{"dim", dim},
        {"template_ones", informative},
        {"test_set_size", 2000},
        {"test_sigma", 1.5}}},
      {"agents", agents},
      {"algorithm",
       {{"mu", 0.4},
        {"delta", 0.5},
        {"iterations", iterations},
        {"repetitions", repetitions},
        {"seed", 7},
        {"curves",
         json::array({{{"name", "regularized"},
                       {"variant", "regularized_diffusion"},
                       {"cooperative", true},
                       {"use_regularizers", true}},
                      {{"name", "unregularized"},
                       {"variant", "regularized_diffusion"},
                       {"cooperative", true},
                       {"use_regularizers", false}},
                      {{"name", "noncooperative"},
                       {"variant", "regularized_diffusion"},
                       {"cooperative", false},
                       {"use_regularizers", true}}})}}},
      {"metrics",
       {{"oracle_tol", 1e-8},
        {"window_fraction", 0.2},
        {"test_error_stride", 20},
        {"msd_target", "origin"}}},
      {"output_dir", "out"}};
  return j;
}

}  // namespace detail

/// Builtin experiment presets; `name` is one of bias-1d, bias-10d,
/// contraction-quad, msd-quadratic, paper-fig3, paper-fig3-full.
inline nlohmann::json preset_config(const std::string& name) {
  using nlohmann::json;

  if (name == "bias-1d") {
    return json{
        {"network", {{"n_agents", 1}, {"topology", "complete"}, {"rule", "uniform"}}},
        {"data", {{"dim", 1}}},
        {"agents",
         json::array({{{"class", "custom"},
                       {"risk",
                        {{"kind", "quadratic"},
                         {"hessian", json::array({json::array({1.0})})},
                         {"b", json::array({2.0})}}},
                       {"regularizer", {{"kind", "l1"}, {"rho1", 1.0}}}}})},
        {"algorithm",
         {{"mu", 0.01}, {"delta", 0.1}, {"iterations", 200}, {"repetitions", 1},
          {"seed", 1}}},
        {"metrics", {{"oracle_tol", 1e-12}, {"msd_target", "nonsmooth"}}},
        {"output_dir", "out"}};
  }

  if (name == "bias-10d") {
    const std::size_t dim = 10;
    auto hk = [&](double base) {
      std::vector<double> d(dim);
      for (std::size_t i = 0; i < dim; ++i)
        d[i] = base + 0.2 * static_cast<double>((i + 1) % 3);
      return detail::diag_hessian(dim, d);
    };
    auto bk = [&](double informative, double sparse) {
      json b = json::array();
      for (std::size_t i = 0; i < dim; ++i) b.push_back(i < 5 ? informative : sparse);
      return b;
    };
    return json{
        {"network", {{"n_agents", 3}, {"topology", "ring"}, {"rule", "metropolis"}}},
        {"data", {{"dim", dim}}},
        {"agents",
         json::array(
             {{{"class", "custom"},
               {"risk", {{"kind", "quadratic"}, {"hessian", hk(1.0)}, {"b", bk(1.5, 0.2)}}},
               {"regularizer",
                {{"kind", "group_l1"}, {"rho1", 1.0}, {"mask", json::array({5, 6, 7})}}}},
              {{"class", "custom"},
               {"risk", {{"kind", "quadratic"}, {"hessian", hk(1.2)}, {"b", bk(1.2, 0.15)}}},
               {"regularizer",
                {{"kind", "group_l1"}, {"rho1", 1.0}, {"mask", json::array({7, 8, 9})}}}},
              {{"class", "custom"},
               {"risk", {{"kind", "quadratic"}, {"hessian", hk(0.9)}, {"b", bk(1.8, 0.25)}}},
               {"regularizer", {{"kind", "zero"}}}}})},
        {"algorithm",
         {{"mu", 0.01}, {"delta", 0.1}, {"iterations", 200}, {"repetitions", 1},
          {"seed", 1}}},
        {"metrics", {{"oracle_tol", 1e-12}, {"msd_target", "nonsmooth"}}},
        {"output_dir", "out"}};
  }

  if (name == "contraction-quad") {
    const std::size_t dim = 6;
    auto hk = [&](double base, double spread) {
      std::vector<double> d(dim);
      for (std::size_t i = 0; i < dim; ++i)
        d[i] = base + spread * static_cast<double>(i) / static_cast<double>(dim - 1);
      return detail::diag_hessian(dim, d);
    };
    auto bk = [&](double v) {
      json b = json::array();
      for (std::size_t i = 0; i < dim; ++i)
        b.push_back(v * (1.0 + 0.3 * static_cast<double>(i % 3)));
      return b;
    };
    json agents = json::array();
    for (std::size_t k = 0; k < 4; ++k) {
      json a = {{"class", "custom"},
                {"risk",
                 {{"kind", "quadratic"},
                  {"hessian", hk(0.8 + 0.2 * double(k), 1.0)},
                  {"b", bk(0.5 + 0.4 * double(k))}}}};
      a["regularizer"] = (k % 2 == 0) ? json{{"kind", "l1"}, {"rho1", 0.5}}
                                      : json{{"kind", "zero"}};
      agents.push_back(a);
    }
    return json{
        {"network", {{"n_agents", 4}, {"topology", "ring"}, {"rule", "metropolis"}}},
        {"data", {{"dim", dim}}},
        {"agents", agents},
        {"algorithm",
         {{"mu", 0.01}, {"delta", 0.05}, {"iterations", 500}, {"repetitions", 1},
          {"seed", 1}}},
        {"metrics", {{"oracle_tol", 1e-12}, {"msd_target", "smoothed"}}},
        {"output_dir", "out"}};
  }

  if (name == "msd-quadratic") {
    const std::size_t dim = 5;
    json agents = json::array();
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<double> d(dim);
      for (std::size_t i = 0; i < dim; ++i)
        d[i] = 1.0 + 0.2 * static_cast<double>((i + k) % 4);
      json b = json::array();
      for (std::size_t i = 0; i < dim; ++i)
        b.push_back(i < 3 ? 1.0 + 0.2 * double(k % 2) : 0.05);
      json a = {{"class", "custom"},
                {"risk",
                 {{"kind", "quadratic"},
                  {"hessian", detail::diag_hessian(dim, d)},
                  {"b", b},
                  {"noise_mode", "synthetic"},
                  {"synth_sigma", 1.0}}}};
      a["regularizer"] = (k < 2) ? json{{"kind", "group_l1"},
                                        {"rho1", 0.1},
                                        {"mask", json::array({3, 4})}}
                                 : json{{"kind", "zero"}};
      agents.push_back(a);
    }
    return json{
        {"network", {{"n_agents", 5}, {"topology", "ring"}, {"rule", "metropolis"}}},
        {"data", {{"dim", dim}}},
        {"agents", agents},
        {"algorithm",
         {{"mu_sweep", json::array({4e-3, 2e-3, 1e-3})},
          {"kappa", 0.3},
          {"iterations", 20000},
          {"repetitions", 30},
          {"seed", 11}}},
        {"metrics",
         {{"oracle_tol", 1e-11}, {"window_fraction", 0.2}, {"msd_target", "smoothed"}}},
        {"output_dir", "out"}};
  }

  if (name == "paper-fig3")
    return detail::fig3_config(3, 5, 2, 20, 10, 2000, 30);
  if (name == "paper-fig3-full")
    return detail::fig3_config(10, 20, 10, 100, 50, 4000, 30);

  throw ConfigParse("unknown preset: " + name);
}

}  // namespace regdiff
