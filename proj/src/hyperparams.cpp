#include <array>
#include <cmath>
#include <map>
#include <optional>

#include "dtn/training.hpp"

namespace dtn {

namespace {

constexpr std::array<double, 7> kGrid = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};

struct Cell {
  double std = 0, lr = 0;
  bool present() const { return std > 0; }
};
using Row = std::array<Cell, 7>;
using Table = std::array<Row, 4>;  // ancillas per data qubit 0..3

constexpr Cell na{};

// clang-format off
constexpr Table kMnist = {{
  {{{.05, .005}, {.05, .005}, {.08, .005}, {.1, .005}, {.2, .005}, {.3, .005}, {.5, .005}}},
  {{{.07, .005}, {.05, .005}, {.08, .005}, {.09, .005}, {.1, .015}, {.1, .015}, {.1, .015}}},
  {{{.05, .005}, {.05, .005}, {.04, .005}, {.03, .005}, {.03, .005}, {.02, .005}, {.01, .005}}},
  {{{.05, .005}, na, na, na, na, na, {.01, .015}}},
}};

constexpr Table kKmnist = {{
  {{{.03, .005}, {.03, .005}, {.02, .005}, {.01, .005}, {.05, .005}, {.01, .005}, {.005, .005}}},
  {{{.03, .005}, {.03, .005}, {.05, .005}, {.1, .005}, {.15, .005}, {.2, .005}, {.3, .005}}},
  {{{.05, .005}, {.05, .005}, {.03, .005}, {.01, .005}, {.007, .005}, {.007, .005}, {.005, .005}}},
  {{{.05, .005}, na, na, na, na, na, {.01, .015}}},
}};

constexpr Table kFashion = {{
  {{{.05, .005}, {.05, .005}, {.1, .005}, {.2, .005}, {.3, .015}, {.4, .015}, {.5, .015}}},
  {{{.5, .005}, {.5, .005}, {.3, .005}, {.1, .005}, {.05, .015}, {.01, .015}, {.005, .015}}},
  {{{.005, .005}, {.005, .005}, {.005, .005}, {.005, .005}, {.005, .015}, {.005, .015}, {.005, .015}}},
  {{{.005, .005}, na, na, na, na, na, {.05, .015}}},
}};

constexpr Table kFashionCoherentData = {{
  {{{.05, .005}, {.05, .005}, {.05, .005}, {.04, .005}, {.04, .005}, {.03, .005}, {.03, .005}}},
  {{{.5, .005}, {.5, .005}, {.4, .005}, {.3, .005}, {.2, .005}, {.2, .005}, {.1, .005}}},
  {{{.005, .005}, {.005, .005}, {.01, .005}, {.03, .005}, {.05, .005}, {.06, .005}, {.07, .005}}},
  {{{.005, .005}, na, na, na, na, na, {.05, .015}}},
}};

constexpr Table kMeraPca = {{
  {{{.5, .005}, {.4, .005}, {.3, .005}, {.2, .005}, {.1, .005}, {.07, .005}, {.07, .005}}},
  {{{.3, .025}, {.3, .025}, {.3, .025}, {.4, .025}, {.4, .025}, {.5, .025}, {.5, .025}}},
  {{na, na, na, na, na, na, na}},
  {{na, na, na, na, na, na, na}},
}};
// clang-format on

const Table* find_table(const std::string& name) {
  static const std::map<std::string, const Table*> tables = {
      {"mnist", &kMnist},
      {"kmnist", &kKmnist},
      {"fashion", &kFashion},
      {"fashion-undephased-data", &kFashionCoherentData},
      {"mera-pca", &kMeraPca},
  };
  const auto it = tables.find(name);
  return it == tables.end() ? nullptr : it->second;
}

}  // namespace

std::optional<Hyperparams> lookup_hyperparams(const std::string& table, int k, double p) {
  const Table* t = find_table(table);
  if (t == nullptr || k < 0 || k >= static_cast<int>(t->size())) return std::nullopt;
  const Row& r = (*t)[static_cast<std::size_t>(k)];
  std::optional<Hyperparams> best;
  double best_dist = 0;
  for (std::size_t j = 0; j < kGrid.size(); ++j) {
    if (!r[j].present()) continue;
    const double d = std::abs(kGrid[j] - p);
    if (!best || d < best_dist) {
      best = Hyperparams{r[j].std, r[j].lr};
      best_dist = d;
    }
  }
  return best;
}

Hyperparams default_hyperparams(const std::string& dataset, ModelKind model, AncillaScheme scheme, int k, double p,
                                bool dephase_data_layer) {
  std::string table = "mnist";
  int row = scheme == AncillaScheme::per_node ? k / 2 : k;
  if (model == ModelKind::mera) {
    table = "mera-pca";
  } else if (dataset == "kmnist") {
    table = "kmnist";
  } else if (dataset == "fashion") {
    table = dephase_data_layer ? "fashion" : "fashion-undephased-data";
  }
  row = std::min(row, 3);
  if (auto h = lookup_hyperparams(table, row, p)) return *h;
  if (auto h = lookup_hyperparams("mnist", row, p)) return *h;
  return {};
}

}  // namespace dtn
