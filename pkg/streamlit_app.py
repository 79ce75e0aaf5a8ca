import streamlit as st

from components.fidelity_charts import plot_latency_curves, plot_purification_curves, plot_teleport_chain
from components.layout_selector import render_mesh_selector
from components.resource_charts import plot_scheme_comparison, plot_sensitivity, plot_sweep
from components.sim_metrics import display_sim_report
from components.sweep_table import display_plan_table
from utils.channel import PlacementScheme, PlannerSettings, error_rate_sensitivity, scheme_comparison
from utils.errors import InterconnectError
from utils.fidelity import crossover_distance, latency_table, teleport_chain_table
from utils.params import ErrorRates, ParameterSet, ThresholdPolicy, default_ion_trap
from utils.purification import Protocol, breakdown_error_rate, purification_curve
from utils.simulator import SimSettings, contention_free_bound, run
from utils.cli import SweepSpec, normalize_sweep, run_sweep

# --- Page Configuration ---
st.set_page_config(
    page_title="EPR Interconnect Explorer",
    page_icon="🔗",
    layout="wide",
    initial_sidebar_state="expanded"
)

st.title("🔗 EPR Interconnect Explorer")
st.caption("Fidelity, purification and contention models for teleportation-based quantum interconnects")

# --- Initialize Session State ---
if 'params' not in st.session_state:
    st.session_state.params = default_ion_trap()
if 'hop_spacing' not in st.session_state:
    st.session_state.hop_spacing = 600
if 'endpoint_cap' not in st.session_state:
    st.session_state.endpoint_cap = 5

# --- Sidebar: parameters ---
st.sidebar.header("Error Rates")
defaults = default_ion_trap()
p_1q = st.sidebar.number_input("p_1q", 0.0, 1.0, defaults.errors.p_1q, format="%.1e")
p_2q = st.sidebar.number_input("p_2q", 0.0, 1.0, defaults.errors.p_2q, format="%.1e")
p_mv = st.sidebar.number_input("p_mv (per cell)", 0.0, 1.0, defaults.errors.p_mv, format="%.1e")
p_ms = st.sidebar.number_input("p_ms", 0.0, 1.0, defaults.errors.p_ms, format="%.1e")
threshold_error = st.sidebar.number_input("Threshold error (1 - F_min)", 1e-9, 0.5, 7.5e-5, format="%.1e")

st.sidebar.markdown("---")
st.sidebar.header("Channel Planner")
st.session_state.hop_spacing = st.sidebar.number_input("Hop spacing (cells)", 1, 5000, st.session_state.hop_spacing)
st.session_state.endpoint_cap = st.sidebar.slider("Max endpoint rounds", 1, 10, st.session_state.endpoint_cap)

try:
    st.session_state.params = ParameterSet(defaults.times, ErrorRates(p_1q, p_2q, p_mv, p_ms),
                                           ThresholdPolicy(1.0 - threshold_error))
except InterconnectError as e:
    st.sidebar.error(f"Invalid parameters: {e}")

params = st.session_state.params
settings = PlannerSettings(hop_spacing=st.session_state.hop_spacing, endpoint_cap=st.session_state.endpoint_cap)
st.sidebar.caption(f"F_min = {params.threshold.f_min:.6f}")

tab_model, tab_purify, tab_plan, tab_sim = st.tabs(["📏 Movement", "🧪 Purification", "🗺️ Channel Plans", "⏱️ Simulation"])

# --- Movement models ---
with tab_model:
    try:
        crossover = crossover_distance(params.times)
        st.plotly_chart(plot_latency_curves(latency_table(range(0, 1250, 25), params.times), crossover),
                        use_container_width=True)
        st.metric("Crossover distance", f"{crossover} cells")
    except InterconnectError as e:
        st.error(str(e))
    chain = teleport_chain_table([0.9999, 0.99999, 1.0], 64, params, st.session_state.hop_spacing)
    st.plotly_chart(plot_teleport_chain(chain, params.threshold.f_min), use_container_width=True)

# --- Purification ---
with tab_purify:
    col1, col2 = st.columns(2)
    start = col1.slider("Starting fidelity", 0.55, 0.999, 0.85)
    rounds = col2.slider("Rounds", 1, 20, 8)
    curves = [purification_curve(p, start, rounds, params.errors) for p in Protocol]
    st.plotly_chart(plot_purification_curves(curves), use_container_width=True)
    with st.expander("Round-by-round data"):
        for df in curves:
            st.dataframe(df, use_container_width=True)

# --- Channel plans ---
with tab_plan:
    max_hops = st.slider("Longest channel (hops)", 1, 64, 32)
    distances = [h * st.session_state.hop_spacing for h in range(1, max_hops + 1)]
    plans = scheme_comparison(params, distances, settings=settings)
    col1, col2 = st.columns(2)
    col1.plotly_chart(plot_scheme_comparison(plans, 'total_pairs'), use_container_width=True)
    col2.plotly_chart(plot_scheme_comparison(plans, 'nonlocal_pairs'), use_container_width=True)
    display_plan_table(plans)

    if st.button("Run error-rate sensitivity"):
        with st.spinner("Planning across error rates..."):
            rates = [10.0 ** (e / 4) for e in range(-36, -11)]
            sensitivity = error_rate_sensitivity(params, rates, PlacementScheme.ENDPOINTS_ONLY, settings=settings)
            breakdown = breakdown_error_rate(Protocol.DEJMPS, params.threshold.f_min)
        st.plotly_chart(plot_sensitivity(sensitivity, breakdown), use_container_width=True)

# --- Simulation ---
with tab_sim:
    layout, stream = render_mesh_selector()
    if layout is not None and st.button("Simulate"):
        try:
            with st.spinner(f"Simulating {len(stream)} instructions..."):
                report = run(stream, layout, params, SimSettings())
                bound = contention_free_bound(stream, layout, params)
            display_sim_report(report, bound)
        except InterconnectError as e:
            st.error(f"Simulation failed: {e}")

    if layout is not None and st.button("Sweep t = g = p"):
        spec = SweepSpec(t_values=(2, 4, 8, 16, 64), couple_tg=True, p_values=())
        with st.spinner("Sweeping resource allocations..."):
            results = normalize_sweep(run_sweep(spec, stream, layout, params))
        st.plotly_chart(plot_sweep(results), use_container_width=True)
        st.dataframe(results, use_container_width=True)

st.info("Models assume ion-trap operation times; simulated runtimes cover communication only.")
