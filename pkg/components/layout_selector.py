import streamlit as st

from utils.topology import HOME_BASE, MOBILE, build_mesh
from utils.workloads import BENCHMARKS, LayoutMode, place


def render_mesh_selector(context_key_suffix="sim"):
    """Sidebar-style inputs for a mesh and benchmark; returns (layout, stream) or (None, None)."""
    st.subheader("Mesh & Benchmark")
    cols = st.columns(3)
    rows = cols[0].number_input("Rows", 1, 16, st.session_state.get('grid_rows', 4), key=f"rows_{context_key_suffix}")
    grid_cols = cols[1].number_input("Cols", 1, 16, st.session_state.get('grid_cols', 4),
                                     key=f"cols_{context_key_suffix}")
    mode = cols[2].selectbox("Layout", [m.value for m in LayoutMode], key=f"mode_{context_key_suffix}")

    cols = st.columns(4)
    t = cols[0].select_slider("t", options=[2, 4, 8, 16, 32, 64, 1024], value=4, key=f"t_{context_key_suffix}")
    g = cols[1].select_slider("g", options=[1, 2, 4, 8, 16, 32, 64, 1024], value=4, key=f"g_{context_key_suffix}")
    p = cols[2].select_slider("p", options=[1, 2, 4, 8, 16, 32, 64, 1024], value=1, key=f"p_{context_key_suffix}")
    benchmark = cols[3].selectbox("Benchmark", sorted(BENCHMARKS), key=f"bench_{context_key_suffix}")

    st.session_state.grid_rows, st.session_state.grid_cols = rows, grid_cols
    n = int(rows * grid_cols)
    if n < 2:
        st.warning("A benchmark needs at least two sites.")
        return None, None

    capacity = MOBILE if mode == LayoutMode.MOBILE.value else HOME_BASE
    layout = build_mesh(int(rows), int(grid_cols), t, g, p, lq_capacity=capacity)
    stream = place(BENCHMARKS[benchmark](n), layout, mode)
    st.caption(f"{len(stream)} instructions over {n} logical qubits, {len(layout.links())} links")
    return layout, stream
