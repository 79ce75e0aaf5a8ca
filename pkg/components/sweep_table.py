import streamlit as st


def display_plan_table(plans_df):
    """Channel plans as a filterable table; infeasible rows are highlighted by their stage."""
    st.subheader("Channel plans")
    if plans_df.empty:
        st.info("No plans computed.")
        return

    schemes = ['All'] + list(plans_df['scheme'].unique())
    selected = st.selectbox("Filter by scheme:", schemes)
    if selected != 'All':
        plans_df = plans_df[plans_df['scheme'] == selected]

    columns = ['scheme', 'distance', 'hops', 'rounds_endpoint', 'rounds_wire', 'rounds_between',
               'total_pairs', 'nonlocal_pairs', 'setup_latency', 'delivered_fidelity', 'feasible', 'failing_stage']
    st.dataframe(plans_df[columns], use_container_width=True)

    infeasible = plans_df[~plans_df['feasible']]
    if not infeasible.empty:
        st.warning(f"{len(infeasible)} channels cannot reach threshold "
                   f"(first failing stage: {infeasible['failing_stage'].iloc[0]}).")
