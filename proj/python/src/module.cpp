// Copyright 2026 The nflfed Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "nflfed/attacks.hpp"
#include "nflfed/bounds.hpp"
#include "nflfed/cli.hpp"
#include "nflfed/divergence.hpp"
#include "nflfed/fedsim.hpp"
#include "nflfed/paillier.hpp"
#include "nflfed/report.hpp"
#include "nflfed/scenario_io.hpp"
#include "nflfed/two_atom.hpp"

namespace py = pybind11;
using namespace nflfed;
using nlohmann::json;

namespace {

// Big integers cross the boundary as Python ints through their decimal text.
mechanisms::BigInt to_big(const py::int_& v) { return mechanisms::BigInt(py::str(v).cast<std::string>()); }
py::int_ to_py(const mechanisms::BigInt& v) {
  return py::reinterpret_steal<py::int_>(PyLong_FromString(v.get_str().c_str(), nullptr, 10));
}

std::string tradeoff_json(const bounds::TradeoffReport& r) {
  json j{{"epsilon_p", report::num(r.epsilon_p)},
         {"epsilon_u", report::num(r.epsilon_u)},
         {"epsilon_e", report::num(r.epsilon_e)},
         {"tv_fed", report::num(r.tv_fed)},
         {"tv", report::nums(r.tv_per_client)},
         {"constants", report::constants_json(r.constants)},
         {"delta_reason", r.delta_reason},
         {"xi_gamma_reason", r.xi_gamma_reason},
         {"checks", report::checks_json(r.checks)}};
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_nflfed, m) {
  m.doc() = "Native core of nflfed";
  m.attr("__version__") = NFLFED_VERSION;
  py::register_exception<Error>(m, "NflfedError", PyExc_RuntimeError);

  m.def("kl_divergence", &divergence::kl_pmf, py::arg("p"), py::arg("q"));
  m.def("js_divergence", &divergence::js_pmf, py::arg("p"), py::arg("q"));
  m.def("tv_distance", &divergence::tv_pmf, py::arg("p"), py::arg("q"));
  m.def(
      "privacy_leakage",
      [](const Vec& prior, const Vec& posterior) {
        return divergence::bayesian_privacy_leakage(divergence::BeliefDistribution::over_indices(prior),
                                                    divergence::BeliefDistribution::over_indices(posterior));
      },
      py::arg("prior"), py::arg("posterior"));
  m.def("gaussian_tv", &divergence::gaussian_tv_1d, py::arg("mean1"), py::arg("var1"), py::arg("mean2"),
        py::arg("var2"));
  m.def(
      "gaussian_tv_sandwich",
      [](const Vec& sigma0, double sigma_eps) {
        auto s = divergence::gaussian_tv_sandwich(sigma0, sigma_eps);
        return py::make_tuple(s.lower, s.upper, s.x);
      },
      py::arg("sigma0"), py::arg("sigma_eps"));

  py::class_<mechanisms::PaillierKeypair>(m, "PaillierKeypair")
      .def_static("generate", &mechanisms::paillier_generate, py::arg("prime_bits"), py::arg("seed"))
      .def_static(
          "from_primes",
          [](const py::int_& p, const py::int_& q) { return mechanisms::paillier_keygen(to_big(p), to_big(q)); },
          py::arg("p"), py::arg("q"))
      .def_property_readonly("n", [](const mechanisms::PaillierKeypair& k) { return to_py(k.pub.n); })
      .def(
          "encrypt",
          [](const mechanisms::PaillierKeypair& k, const py::int_& h, std::uint64_t seed) {
            return to_py(mechanisms::paillier_encrypt(k.pub, to_big(h), seed));
          },
          py::arg("plaintext"), py::arg("seed"))
      .def(
          "decrypt",
          [](const mechanisms::PaillierKeypair& k, const py::int_& c) {
            return to_py(mechanisms::paillier_decrypt(k, to_big(c)));
          },
          py::arg("ciphertext"))
      .def(
          "add",
          [](const mechanisms::PaillierKeypair& k, const py::int_& a, const py::int_& b) {
            return to_py(mechanisms::paillier_add(k.pub, to_big(a), to_big(b)));
          },
          py::arg("a"), py::arg("b"));

  m.def("direct_label_inference", &attacks::direct_label_inference, py::arg("logit_gradient"));

  // JSON-text entry points; the Python wrapper converts to and from dicts.
  m.def("_simulate", [](const std::string& scenario) {
    auto sf = scenario_io::parse_scenario(json::parse(scenario));
    return report::trace_json(fedsim::run(sf.fl), sf.canonical).dump();
  });
  m.def("_two_atom_evaluate", [](const std::string& mechanism) {
    auto cfg = scenario_io::parse_mechanism(json::parse(mechanism));
    return tradeoff_json(two_atom::make_scenario().evaluate(cfg));
  });
  m.def("_mechanism_bounds", [](const std::string& mechanism, double c1, double xi, std::optional<double> delta,
                                std::optional<double> xi_gamma, std::size_t dims, const Vec& sigma0) {
    auto cfg = scenario_io::parse_mechanism(json::parse(mechanism));
    bounds::MechanismBoundInputs in{c1, bounds::c2_from_xi(xi), delta, xi_gamma, dims, sigma0};
    auto priv = bounds::mechanism_privacy_bound(cfg, in);
    auto eff = bounds::mechanism_efficiency_bound(cfg, in);
    json j{{"privacy", {{"raw", report::num(priv.raw)}, {"clamped", report::num(priv.clamped)}}},
           {"utility", report::num(bounds::mechanism_utility_bound(cfg, in))},
           {"efficiency", eff ? report::num(*eff) : json(nullptr)}};
    return j.dump();
  });
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "nflfed");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return cli::main_entry(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
