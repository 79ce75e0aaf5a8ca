import streamlit as st
import plotly.graph_objects as go

SCHEME_COLOURS = {
    'endpoints-only': 'royalblue',
    'virtual-wire': 'seagreen',
    'between-teleports': 'darkorange',
    'between-teleports-virtual-wire': 'firebrick',
}


def plot_scheme_comparison(plans_df, column='total_pairs'):
    """One line per placement scheme of `column` against hop count; infeasible points are dropped."""
    if plans_df.empty:
        st.warning("No channel plans to plot.")
        return go.Figure()

    fig = go.Figure()
    for scheme, group in plans_df[plans_df['feasible']].groupby('scheme', sort=False):
        fig.add_trace(go.Scatter(
            x=group['hops'], y=group[column], mode='lines+markers', name=scheme,
            line=dict(color=SCHEME_COLOURS.get(scheme)),
            text=[f"rounds: {r}" for r in group['rounds_endpoint']], hoverinfo='text+y',
        ))
    fig.update_layout(title=column.replace('_', ' ').capitalize(), xaxis_title='Hops',
                      yaxis_title='EPR pairs per purified pair', yaxis_type='log')
    return fig


def plot_sensitivity(sensitivity_df, breakdown_rate=None):
    """Teleported pairs needed against the uniform error rate."""
    working = sensitivity_df[sensitivity_df['feasible']]
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=working['rate'], y=working['nonlocal_pairs'], mode='lines+markers',
                             name='Teleported pairs'))
    if breakdown_rate is not None:
        fig.add_vline(x=breakdown_rate, line_dash='dash', line_color='red', annotation_text='breakdown')
    fig.update_layout(title='Error-rate sensitivity', xaxis_title='Error rate', yaxis_title='Pairs',
                      xaxis_type='log', yaxis_type='log')
    return fig


def plot_sweep(sweep_df):
    """Normalized makespan per sweep point."""
    df = sweep_df[~sweep_df['baseline']]
    labels = [f"t={t} g={g} p={p}" for t, g, p in zip(df['t'], df['g'], df['p'])]
    fig = go.Figure(go.Bar(x=labels, y=df['normalized'], marker_color='royalblue'))
    fig.add_hline(y=1.0, line_dash='dot', line_color='grey')
    fig.update_layout(title='Runtime normalized to unlimited resources', yaxis_title='Normalized makespan')
    return fig
