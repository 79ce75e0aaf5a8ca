import streamlit as st
import pandas as pd


def display_sim_report(report, bound=None):
    """Headline metrics, EPR accounting and busiest resources of one simulation."""
    if report.instructions == 0:
        st.info("Nothing was simulated.")
        return

    st.subheader("Runtime")
    cols = st.columns(4)
    cols[0].metric("Makespan (us)", f"{report.makespan:,.1f}")
    cols[1].metric("Instructions", f"{report.instructions:,}")
    cols[2].metric("Channels", f"{report.channels:,}")
    if bound:
        cols[3].metric("vs contention-free", f"{report.makespan / bound:.3f}x")

    st.markdown("---")
    st.subheader("EPR pairs")
    cols = st.columns(4)
    cols[0].metric("Generated", f"{report.epr_generated:,}")
    cols[1].metric("Teleport assists", f"{report.epr_teleport_assist:,}")
    cols[2].metric("Purification losses", f"{report.epr_purification_sacrificed:,}")
    cols[3].metric("Used at endpoints", f"{report.epr_endpoint_used:,}")
    if not report.balanced:
        st.error("EPR accounting does not balance.")

    st.markdown("---")
    st.subheader("Busiest resources")
    util = pd.Series(report.utilization, name='utilization').sort_values(ascending=False)
    st.dataframe(util.head(15).to_frame(), use_container_width=True)

    waits = pd.Series(report.queue_wait_histogram, name='channels')
    st.bar_chart(waits)
