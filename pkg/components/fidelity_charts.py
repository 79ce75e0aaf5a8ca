import streamlit as st
import plotly.graph_objects as go


def plot_latency_curves(latency_df, crossover):
    """Ballistic vs teleport latency over distance, with the crossover marked."""
    if latency_df.empty:
        st.warning("No distances to plot.")
        return go.Figure()

    fig = go.Figure()
    fig.add_trace(go.Scatter(x=latency_df['distance'], y=latency_df['ballistic_us'],
                             mode='lines', name='Ballistic', line=dict(color='firebrick')))
    fig.add_trace(go.Scatter(x=latency_df['distance'], y=latency_df['teleport_us'],
                             mode='lines', name='Teleport', line=dict(color='royalblue')))
    fig.add_vline(x=crossover, line_dash='dash', line_color='grey',
                  annotation_text=f"crossover {crossover} cells")
    fig.update_layout(title='Latency vs distance', xaxis_title='Distance (cells)',
                      yaxis_title='Latency (us)', hovermode='x unified')
    return fig


def plot_purification_curves(curves):
    """Error per round for each protocol; curves is a list of purification_curve frames."""
    fig = go.Figure()
    for df in curves:
        if df.empty:
            continue
        fig.add_trace(go.Scatter(
            x=df['round'], y=df['error'], mode='lines+markers',
            name=f"{df['protocol'].iloc[0].upper()} from F={df['fidelity'].iloc[0]:.3f}",
            text=[f"pairs: {e:.1f}" for e in df['expected_pairs']], hoverinfo='text+y',
        ))
    fig.update_layout(title='Purification', xaxis_title='Round', yaxis_title='1 - F', yaxis_type='log')
    return fig


def plot_teleport_chain(chain_df, f_min):
    """EPR error against hop count, one line per starting fidelity, plus the threshold."""
    fig = go.Figure()
    for f0, group in chain_df.groupby('initial_fidelity'):
        fig.add_trace(go.Scatter(x=group['hops'], y=group['error'], mode='lines', name=f"F0 = {f0:g}"))
    # Threshold line
    fig.add_hline(y=1.0 - f_min, line_dash='dot', line_color='black', annotation_text='threshold')
    fig.update_layout(title='Chained teleportation', xaxis_title='Teleports', yaxis_title='1 - F',
                      yaxis_type='log')
    return fig
