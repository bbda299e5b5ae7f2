#include "lnet/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lnet {

using nlohmann::json;

namespace {

constexpr int kConfigVersion = 1;

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + key +
                                  "' in section '" + section + "'");
  }
}

}  // namespace

ElementVocab vocab_by_name(const std::string& name) {
  if (name == "qm9") return ElementVocab::qm9();
  if (name == "dipole") return ElementVocab::dipole();
  if (name == "carbon") return ElementVocab::carbon();
  if (name == "extended") return ElementVocab::extended();
  throw std::invalid_argument("config: unknown vocab '" + name + "'");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text);
  check_keys(j, "<root>", {"version", "vocab", "model", "radial", "conv",
                           "train"});
  if (j.contains("version") && j.at("version").get<int>() != kConfigVersion)
    throw std::invalid_argument("config: unsupported version " +
                                j.at("version").dump());
  RunConfig cfg;
  if (j.contains("vocab")) cfg.vocab = j.at("vocab").get<std::string>();
  vocab_by_name(cfg.vocab);

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"variant", "embedding_size", "hidden_irreps",
                "featurization_blocks", "output_blocks", "output_irreps",
                "output_mlp_layers", "output_mlp_neurons", "residual",
                "targets"});
    if (m.contains("variant"))
      cfg.model.variant = variant_from_name(m.at("variant").get<std::string>());
    if (m.contains("embedding_size"))
      cfg.model.embedding_size = m.at("embedding_size").get<std::size_t>();
    if (m.contains("hidden_irreps"))
      cfg.model.hidden_irreps =
          Irreps::parse(m.at("hidden_irreps").get<std::string>());
    if (m.contains("featurization_blocks"))
      cfg.model.featurization_blocks =
          m.at("featurization_blocks").get<std::size_t>();
    if (m.contains("output_blocks"))
      cfg.model.output_blocks = m.at("output_blocks").get<std::size_t>();
    if (m.contains("output_irreps"))
      cfg.model.output_irreps =
          Irreps::parse(m.at("output_irreps").get<std::string>());
    if (m.contains("output_mlp_layers"))
      cfg.model.output_mlp_layers =
          m.at("output_mlp_layers").get<std::size_t>();
    if (m.contains("output_mlp_neurons"))
      cfg.model.output_mlp_neurons =
          m.at("output_mlp_neurons").get<std::size_t>();
    if (m.contains("residual")) cfg.model.residual = m.at("residual").get<bool>();
    if (m.contains("targets"))
      cfg.model.targets = m.at("targets").get<std::vector<std::string>>();
  }

  if (j.contains("radial")) {
    const json& r = j.at("radial");
    check_keys(r, "radial",
               {"num_basis", "r_max_angstrom", "hidden_layers",
                "hidden_neurons", "basis"});
    if (r.contains("num_basis"))
      cfg.model.radial.num_basis = r.at("num_basis").get<std::size_t>();
    if (r.contains("r_max_angstrom"))
      cfg.model.radial.r_max = r.at("r_max_angstrom").get<double>();
    if (r.contains("hidden_layers"))
      cfg.model.radial.hidden_layers = r.at("hidden_layers").get<std::size_t>();
    if (r.contains("hidden_neurons"))
      cfg.model.radial.hidden_neurons =
          r.at("hidden_neurons").get<std::size_t>();
    // Only the cosine basis is implemented; the key is reserved.
    if (r.contains("basis") && r.at("basis").get<std::string>() != "cosine")
      throw std::invalid_argument("config: unsupported radial basis '" +
                                  r.at("basis").get<std::string>() + "'");
  }

  if (j.contains("conv")) {
    const json& c = j.at("conv");
    check_keys(c, "conv", {"self_interaction", "lf_max"});
    if (c.contains("self_interaction"))
      cfg.model.self_interaction = c.at("self_interaction").get<bool>();
    if (c.contains("lf_max")) cfg.model.lf_max = c.at("lf_max").get<int>();
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"lr_init", "beta1", "beta2", "epsilon", "plateau_factor",
                "plateau_patience", "lr_min", "max_epochs",
                "early_stop_patience", "batch_size", "seed"});
    if (t.contains("lr_init")) cfg.train.lr_init = t.at("lr_init").get<double>();
    if (t.contains("beta1")) cfg.train.beta1 = t.at("beta1").get<double>();
    if (t.contains("beta2")) cfg.train.beta2 = t.at("beta2").get<double>();
    if (t.contains("epsilon")) cfg.train.epsilon = t.at("epsilon").get<double>();
    if (t.contains("plateau_factor"))
      cfg.train.plateau_factor = t.at("plateau_factor").get<double>();
    if (t.contains("plateau_patience"))
      cfg.train.plateau_patience = t.at("plateau_patience").get<int>();
    if (t.contains("lr_min")) cfg.train.lr_min = t.at("lr_min").get<double>();
    if (t.contains("max_epochs"))
      cfg.train.max_epochs = t.at("max_epochs").get<int>();
    if (t.contains("early_stop_patience"))
      cfg.train.early_stop_patience = t.at("early_stop_patience").get<int>();
    if (t.contains("batch_size"))
      cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
    if (t.contains("seed")) cfg.train.seed = t.at("seed").get<std::uint64_t>();
  }

  cfg.model.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_run_config(buffer.str());
}

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["version"] = kConfigVersion;
  j["vocab"] = cfg.vocab;
  j["model"] = {
      {"variant", variant_name(cfg.model.variant)},
      {"embedding_size", cfg.model.embedding_size},
      {"hidden_irreps", cfg.model.hidden_irreps.str()},
      {"featurization_blocks", cfg.model.featurization_blocks},
      {"output_blocks", cfg.model.output_blocks},
      {"output_irreps", cfg.model.output_irreps.str()},
      {"output_mlp_layers", cfg.model.output_mlp_layers},
      {"output_mlp_neurons", cfg.model.output_mlp_neurons},
      {"residual", cfg.model.residual},
      {"targets", cfg.model.targets},
  };
  j["radial"] = {
      {"num_basis", cfg.model.radial.num_basis},
      {"r_max_angstrom", cfg.model.radial.r_max},
      {"hidden_layers", cfg.model.radial.hidden_layers},
      {"hidden_neurons", cfg.model.radial.hidden_neurons},
      {"basis", "cosine"},
  };
  j["conv"] = {
      {"self_interaction", cfg.model.self_interaction},
      {"lf_max", cfg.model.lf_max},
  };
  j["train"] = {
      {"lr_init", cfg.train.lr_init},
      {"beta1", cfg.train.beta1},
      {"beta2", cfg.train.beta2},
      {"epsilon", cfg.train.epsilon},
      {"plateau_factor", cfg.train.plateau_factor},
      {"plateau_patience", cfg.train.plateau_patience},
      {"lr_min", cfg.train.lr_min},
      {"max_epochs", cfg.train.max_epochs},
      {"early_stop_patience", cfg.train.early_stop_patience},
      {"batch_size", cfg.train.batch_size},
      {"seed", cfg.train.seed},
  };
  return j.dump(2);
}

}  // namespace lnet
