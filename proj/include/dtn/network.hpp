#pragma once

// Unitary TTN / MERA topologies, the live-wire evaluation plan, and the
// density-matrix evaluator with reverse-mode gradients.

#include <filesystem>
#include <string>
#include <vector>

#include "dtn/channels.hpp"
#include "dtn/tensor_core.hpp"

namespace dtn {

enum class ModelKind { ttn, mera };
enum class AncillaScheme { per_qubit, per_node };
enum class NodeKind { tree, entangler, root };
enum class WireKind { data, ancilla, internal };

std::string to_string(ModelKind kind);
std::string to_string(AncillaScheme scheme);
ModelKind parse_model_kind(const std::string& s);
AncillaScheme parse_scheme(const std::string& s);

struct Wire {
  WireKind kind = WireKind::internal;
  int feature = -1;   // data wires: feature index
  int producer = -1;  // internal wires: node index
};

/// One unitary acting on `inputs` (first listed = most significant qubit).
/// Output qubit q of the unitary becomes wire kept[q] for q < |kept|, the rest
/// are traced.
struct UnitaryNode {
  NodeKind kind = NodeKind::tree;
  int layer = 0;
  std::vector<int> inputs;
  std::vector<int> kept;
  std::vector<int> traced;
  int n_i = 0;  // non-ancilla inputs
  int n_a = 0;  // ancilla inputs
  int n_o = 0;  // kept outputs

  int qubits() const { return static_cast<int>(inputs.size()); }
  Index dim() const { return Index{1} << inputs.size(); }
  /// Stinespring counting: enough ancillas for an arbitrary channel.
  bool covers_all_channels() const { return n_a >= 2 * n_o; }
};

struct NetworkTopology {
  ModelKind kind = ModelKind::ttn;
  int m = 0;
  int k = 0;  // ancillas per data qubit, or per node for AncillaScheme::per_node
  AncillaScheme scheme = AncillaScheme::per_qubit;
  std::vector<Wire> wires;
  std::vector<UnitaryNode> nodes;  // topological order
  int readout_wire = -1;
  int tree_layers = 0;
  double p = 0.0;
  bool dephase_data_layer = true;

  int bond_qubits() const { return scheme == AncillaScheme::per_qubit ? 1 + k : 1; }
  Index parameter_count() const;
  /// Structural checks: wire usage, arities, kept/traced balance.
  void validate() const;
};

NetworkTopology build_ttn(int m, int k, AncillaScheme scheme = AncillaScheme::per_qubit);
NetworkTopology build_mera(int m, int k);
NetworkTopology build_network(ModelKind kind, int m, int k, AncillaScheme scheme);

// ---------------------------------------------------------------------------
// Evaluation plan

enum class StepKind { load_data, load_ancilla, merge, permute, apply, trace, dephase, readout };

/// Register machine instruction. Registers ("slots") are independent tensor
/// factors of the global state; `slot` is the register acted on.
struct PlanStep {
  explicit PlanStep(StepKind k) : kind(k) {}

  StepKind kind;
  int slot = -1;
  int other = -1;    // merge: source slot appended after `slot`
  int node = -1;     // apply
  int count = 0;     // trace / dephase: trailing qubits
  int feature = -1;  // load_data
  std::vector<int> order;  // permute
  bool grad_slot = true;   // merge: whether each factor depends on parameters
  bool grad_other = true;
};

struct EvaluationPlan {
  std::vector<PlanStep> steps;
  std::vector<int> node_order;
  int slots = 0;
  int max_width = 0;  // widest register contracted, in qubits
  int readout_slot = -1;
};

inline constexpr int kDefaultWidthCap = 12;

/// Greedy contraction order: repeatedly apply the ready node whose merged
/// register is narrowest, tracing immediately. Throws if the cap is exceeded.
EvaluationPlan live_wire_schedule(const NetworkTopology& net, int width_cap = kDefaultWidthCap);

// ---------------------------------------------------------------------------
// Parameters

struct Prediction {
  Eigen::Vector2d probs = Eigen::Vector2d::Zero();
  int predicted_class = 0;

  static Prediction from_probs(double p0, double p1);
};

class Network {
 public:
  Network() = default;
  explicit Network(NetworkTopology topology, int width_cap = kDefaultWidthCap);

  const NetworkTopology& topology() const { return topology_; }
  const EvaluationPlan& plan() const { return plan_; }
  const std::vector<HermitianParam>& params() const { return params_; }
  const HermitianExp& exp(int node) const { return exps_[static_cast<std::size_t>(node)]; }
  const CMatrix& unitary(int node) const { return exps_[static_cast<std::size_t>(node)].unitary(); }
  int node_count() const { return static_cast<int>(params_.size()); }

  double p() const { return topology_.p; }
  void set_p(double p);
  void set_dephase_data_layer(bool on) { topology_.dephase_data_layer = on; }

  void set_params(std::vector<HermitianParam> params);
  void set_node(int node, HermitianParam h);
  Index flat_size() const;
  RVector flat() const;
  void set_flat(const RVector& flat);

  /// Converts per-node gradients w.r.t. U (dL = Re tr(G^dagger dU)) into the
  /// gradient w.r.t. the flat packed parameter vector.
  RVector pullback(const std::vector<CMatrix>& grad_u) const;

 private:
  void refresh(int node);

  NetworkTopology topology_;
  EvaluationPlan plan_;
  std::vector<HermitianParam> params_;
  std::vector<HermitianExp> exps_;
};

/// Per-node gradients w.r.t. the node unitaries, dL = sum Re tr(G^dagger dU).
using UnitaryGradients = std::vector<CMatrix>;
UnitaryGradients zero_gradients(const Network& net);

/// Per-node accumulator in whatever coordinates a model differentiates in
/// (U itself for the density evaluator, |U|^2 or its marginal for the
/// probability evaluator). Summing buffers is the batch reduction.
struct GradientBuffer {
  std::vector<CMatrix> complex;
  std::vector<RMatrix> real;

  void add(const GradientBuffer& other);
};

/// Probability floor of the readout loss.
inline constexpr double kProbFloor = 1e-12;

/// An evaluator bound to one parameter snapshot.
class Model {
 public:
  virtual ~Model() = default;
  virtual Prediction predict(const RVector& features) const = 0;
  virtual GradientBuffer make_buffer() const = 0;
  /// Adds the gradient of -ln P(label) into `buffer`; returns the loss.
  virtual double accumulate(const RVector& features, int label, GradientBuffer& buffer) const = 0;
  virtual UnitaryGradients to_unitary(const GradientBuffer& buffer) const = 0;
};

/// Density-matrix evaluator: dephasing at rate p after every node and (optionally)
/// on the data layer.
class DensityModel final : public Model {
 public:
  explicit DensityModel(const Network& net) : net_(net) {}
  Prediction predict(const RVector& features) const override;
  GradientBuffer make_buffer() const override;
  double accumulate(const RVector& features, int label, GradientBuffer& buffer) const override;
  UnitaryGradients to_unitary(const GradientBuffer& buffer) const override;
  /// Readout qubit state before measurement.
  CMatrix readout_state(const RVector& features) const;

 private:
  const Network& net_;
};

Prediction forward(const Network& net, const RVector& features);

/// Data-qubit state after the optional data-layer dephasing.
CMatrix data_qubit(double x, double p, bool dephase);

// ---------------------------------------------------------------------------
// Checkpoints: "DTNCKPT1", u8 kind, u32 m, u32 k, u8 scheme, f64 p,
// u8 dephase_data_layer, u32 node count, then per node the packed f64
// parameters. Little-endian.

void write_checkpoint(const std::filesystem::path& path, const Network& net);
Network read_checkpoint(const std::filesystem::path& path);

}  // namespace dtn
