#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nadir::network {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

enum class BusKind { Slack, PV, PQ };

/// Bus with per-unit demand. `id` is the contiguous index assigned at load
/// time; `label` is the identifier used in the network file.
struct Bus {
    int id = 0;
    int label = 0;
    BusKind kind = BusKind::PQ;
    double voltage_setpoint = 1.0;
    double load_p = 0.0;
    double load_q = 0.0;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
};

struct Branch {
    int from = 0;
    int to = 0;
    Complex series_impedance{0.0, 0.0};
    double shunt_susceptance = 0.0;
    double tap_ratio = 1.0;  // off-nominal tap on the `from` side
};

/// Synchronous machine; inertia and damping are stored on the system base.
struct Generator {
    int bus = 0;
    double inertia_h = 0.0;
    double damping_d = 0.0;
    double p_max = 0.0;
    double p_mech = 0.0;  // dispatch at 100 % load level
    double droop_gain = 0.0;
    double governor_tc = 1.0;
    double transient_reactance = 0.0;
};

/// Zero-inertia constant injection (wind farm). Scales with the load level.
struct Renewable {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
    double p_rated = 0.0;
};

struct PowerNetwork {
    std::string name;
    double base_mva = 100.0;
    double base_kv = 0.0;  // 0 when unknown; enables ohmic distances otherwise
    double frequency_hz = 60.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Renewable> renewables;

    std::size_t bus_count() const { return buses.size(); }
    int slack_bus() const;
    /// Bus index for a file label, or -1.
    int index_of_label(int label) const;
    /// Throws InvalidNetwork when a type invariant is violated.
    void validate() const;
};

PowerNetwork parse_network(const std::string& json_text);
PowerNetwork load_network(const std::filesystem::path& path);
std::string network_to_json(const PowerNetwork& network);

/// Explicit injections for one power-flow solve.
struct OperatingPoint {
    double load_scale = 1.0;
    std::vector<double> load_p;  // per bus
    std::vector<double> load_q;
    std::vector<double> gen_p;  // scheduled per generator; the slack entry is an output
    std::vector<bool> gen_in_service;
    std::vector<double> renewable_p;
    std::vector<double> renewable_q;
};

/// Loads, renewables and conventional dispatch all scaled by `load_scale`.
OperatingPoint scaled_operating_point(const PowerNetwork& network, double load_scale);

struct PowerFlowOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
};

struct PowerFlowSolution {
    OperatingPoint operating_point;
    std::vector<double> vm;  // per bus, per-unit
    std::vector<double> va;  // per bus, radians, reference bus at 0
    std::vector<double> gen_p;  // electromagnetic power P_e per generator
    std::vector<double> gen_q;
    int slack_generator = -1;
    int reference_bus = -1;
    double mismatch_norm = 0.0;
    int iterations = 0;

    double total_generation() const;
};

/// Admittance without loads or machines: branches and bus shunts only.
ComplexMatrix admittance_matrix(const PowerNetwork& network);

/// Newton-Raphson in polar coordinates.
PowerFlowSolution solve_power_flow(const PowerNetwork& network, const OperatingPoint& point,
                                   const PowerFlowOptions& options = {});
PowerFlowSolution solve_power_flow(const PowerNetwork& network, double load_scale,
                                   const PowerFlowOptions& options = {});

/// Complex power injection per bus recomputed from Y and V∠θ.
std::vector<Complex> bus_injections(const ComplexMatrix& y, const std::vector<double>& vm,
                                    const std::vector<double>& va);

struct NetworkMatrices {
    ComplexMatrix y;
    ComplexMatrix z;
    double residual = 0.0;  // ‖Y·Z − I‖∞
};

/// Grounded admittance (loads as constant admittance at the solved voltage,
/// machine transient reactances to ground) and its inverse.
NetworkMatrices build_matrices(const PowerNetwork& network, const PowerFlowSolution& solution);
/// Same, with every bus at its voltage setpoint and unscaled loads.
NetworkMatrices build_matrices(const PowerNetwork& network);
/// Inverse of an assembled admittance; SingularMatrix when not invertible.
NetworkMatrices invert_admittance(ComplexMatrix y);

/// D_ij = |Z_ii + Z_jj − 2 Z_ij|.
RealMatrix electrical_distance(const ComplexMatrix& z);

/// Y_kk − Y_ke Y_ee⁻¹ Y_ek for the kept index set, in the given order.
ComplexMatrix kron_reduce(const ComplexMatrix& y, const std::vector<int>& keep);

/// Network reduced to machine internal nodes (behind x'd) plus optional
/// extra buses; the reduced index of machine `generators[i]` is i.
struct ReducedNetwork {
    std::vector<int> generators;
    std::vector<int> extra_buses;
    ComplexMatrix y;
    std::vector<Complex> emf;  // internal voltage per listed machine
};

/// Machines with `in_service == false` (or index `excluded`) are dropped.
ReducedNetwork reduce_to_internal_nodes(const PowerNetwork& network, const PowerFlowSolution& solution,
                                        const std::vector<int>& extra_buses, int excluded_generator = -1);

/// V_i V_k (B cos δ − G sin δ).
double sync_coefficient(double v_i, double v_k, double b_ik, double g_ik, double delta_ik);

struct SyncCoefficients {
    int disturbance_bus = -1;
    std::vector<int> generators;
    std::vector<double> coefficient;
    std::vector<double> v_machine;
    double v_disturbance = 0.0;
    std::vector<double> delta;
    std::vector<double> b;
    std::vector<double> g;
    std::vector<double> inertia_h;  // fallback weights
};

SyncCoefficients sync_coefficients(const PowerNetwork& network, const PowerFlowSolution& solution,
                                   int disturbance_bus, int excluded_generator = -1);

/// share_i = P_sik / Σ P_sjk · delta_p, summing to delta_p. Falls back to
/// inertia weights (with a warning) when Σ P_sjk ≤ 0.
std::vector<double> distribute_unbalanced_power(const SyncCoefficients& coeffs, double delta_p);

/// Symmetric Laplacian of pairwise synchronizing coefficients between the
/// listed machines' internal nodes.
RealMatrix synchronizing_matrix(const ReducedNetwork& reduced);

}  // namespace nadir::network
