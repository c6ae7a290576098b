"""
Experiment Charts Module untuk SCALE-I
======================================
Modul ini berisi figure untuk laporan eksperimen: rate hasil trial dan
distribusi korelasi per eksperimen, serta heatmap change matrix.
"""

from typing import List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from scores.change_analysis import ChangeMatrix

STATUS_COLORS = {
    'success': '#2ca02c',
    'identifiability_failure': '#ff7f0e',
    'refinement_failure': '#d62728',
    'error': '#7f7f7f',
}


class ExperimentVisualizer:
    """
    Class untuk membuat figure dari gabungan tabel results.csv.

    Frame butuh kolom ``experiment`` di samping kolom-kolom results.csv.
    """

    def __init__(self, df: pd.DataFrame):
        if 'experiment' not in df.columns:
            raise ValueError("Results frame needs an 'experiment' column")
        self.df = df.copy()

    @property
    def experiments(self) -> List[str]:
        return sorted(self.df['experiment'].unique())

    def outcome_rates(self) -> pd.DataFrame:
        """Fraksi tiap status per eksperimen plus rate dag_exact (kosong dihitung False)."""
        rates = (self.df.groupby('experiment')['status']
                 .value_counts(normalize=True)
                 .unstack(fill_value=0.0))
        rates['dag_exact'] = (self.df.assign(dag_exact=self.df['dag_exact'].eq(True))
                              .groupby('experiment')['dag_exact'].mean())
        return rates

    def success_rate_chart(self, figsize: Tuple = (10, 6)) -> plt.Figure:
        rates = self.outcome_rates()
        status_cols = [c for c in STATUS_COLORS if c in rates.columns]
        fig, ax = plt.subplots(figsize=figsize)
        rates[status_cols].plot(kind='bar', stacked=True, ax=ax,
                                color=[STATUS_COLORS[c] for c in status_cols])
        ax.plot(range(len(rates)), rates['dag_exact'], 'ko--', label='dag_exact')
        ax.set_ylim(0, 1.05)
        ax.set_ylabel('Fraction of trials')
        ax.set_xlabel('')
        ax.set_title('Trial outcomes per experiment', fontweight='bold')
        ax.legend(loc='upper left', bbox_to_anchor=(1.0, 1.0))
        plt.setp(ax.get_xticklabels(), rotation=30, ha='right')
        plt.tight_layout()
        return fig

    def correlation_chart(self, figsize: Tuple = (10, 6)) -> Optional[plt.Figure]:
        scored = self.df.dropna(subset=['min_corr'])
        if scored.empty:
            return None
        fig, ax = plt.subplots(figsize=figsize)
        sns.boxplot(data=scored, x='experiment', y='min_corr', ax=ax, color='#aec7e8')
        sns.stripplot(data=scored, x='experiment', y='min_corr', ax=ax, color='#1f77b4',
                      size=4, alpha=0.6)
        ax.axhline(0.99, color='#d62728', linestyle='--', linewidth=1)
        ax.set_ylabel('min per-node |corr|')
        ax.set_xlabel('')
        ax.set_title('Matched correlation per experiment', fontweight='bold')
        plt.setp(ax.get_xticklabels(), rotation=30, ha='right')
        plt.tight_layout()
        return fig

    def report_figure(self, figsize: Tuple = (14, 6)) -> plt.Figure:
        """Kedua panel berdampingan."""
        fig, (ax_rates, ax_corr) = plt.subplots(1, 2, figsize=figsize)
        rates = self.outcome_rates()
        status_cols = [c for c in STATUS_COLORS if c in rates.columns]
        rates[status_cols].plot(kind='bar', stacked=True, ax=ax_rates,
                                color=[STATUS_COLORS[c] for c in status_cols])
        ax_rates.set_ylim(0, 1.05)
        ax_rates.set_title('Trial outcomes', fontweight='bold')
        ax_rates.set_xlabel('')

        scored = self.df.dropna(subset=['min_corr'])
        if scored.empty:
            ax_corr.text(0.5, 0.5, 'no scored trials', ha='center', va='center')
            ax_corr.set_axis_off()
        else:
            sns.boxplot(data=scored, x='experiment', y='min_corr', ax=ax_corr, color='#aec7e8')
            ax_corr.axhline(0.99, color='#d62728', linestyle='--', linewidth=1)
            ax_corr.set_title('min per-node |corr|', fontweight='bold')
            ax_corr.set_xlabel('')
        for ax in (ax_rates, ax_corr):
            plt.setp(ax.get_xticklabels(), rotation=30, ha='right')
        plt.tight_layout()
        return fig


def change_matrix_heatmap(delta: ChangeMatrix, title: str = 'Change matrix',
                          figsize: Tuple = (5, 4)) -> plt.Figure:
    rows, cols = delta.shape
    fig, ax = plt.subplots(figsize=figsize)
    sns.heatmap(delta.delta, annot=True, fmt='d', cbar=False, cmap='Blues', ax=ax,
                linewidths=0.5, linecolor='white',
                xticklabels=[f'E{m + 1}' for m in range(cols)],
                yticklabels=[str(i + 1) for i in range(rows)])
    ax.set_xlabel('environment')
    ax.set_ylabel('score coordinate')
    ax.set_title(title, fontweight='bold')
    plt.tight_layout()
    return fig


def save_figure(fig: plt.Figure, path: str, dpi: int = 120) -> None:
    fig.savefig(path, dpi=dpi, bbox_inches='tight')
    plt.close(fig)
