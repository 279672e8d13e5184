"""
Report Builders - Console lines for CLI results and progress
"""

from typing import Dict, List, Sequence

from models import WinTieLossTable


class ReportBuilder:
    """Builds the text the CLI prints"""

    OK = "✅"
    WARN = "⚠️"
    FAIL = "❌"
    STATS = "📊"

    @staticmethod
    def accuracy_bar(accuracy: float, segments: int = 20) -> str:
        """Bar for an accuracy in [0, 1]"""
        clamped = min(max(accuracy, 0.0), 1.0)
        filled = int(round(clamped * segments))
        return '█' * filled + '░' * (segments - filled)

    @staticmethod
    def config_summary(name: str, summary: Dict) -> str:
        """One line per config: AUBC mean ± std and final accuracy"""
        if "aubc_mean" not in summary:
            return f"{ReportBuilder.FAIL} {name}: every trial failed"
        line = (f"{ReportBuilder.STATS} {name}: AUBC {summary['aubc_mean']:.4f} ± {summary['aubc_std']:.4f}"
                f" | F-acc {summary['final_accuracy_mean']:.4f} "
                f"{ReportBuilder.accuracy_bar(summary['final_accuracy_mean'])}")
        if "pseudo_label_error_rate" in summary:
            line += f" | pseudo-label error {summary['pseudo_label_error_rate']:.2%}"
        if "worst_group_accuracy_mean" in summary:
            line += f" | worst group {summary['worst_group_accuracy_mean']:.4f}"
        if summary.get("failed_trials"):
            line += f" {ReportBuilder.WARN} failed trials {summary['failed_trials']}"
        return line

    @staticmethod
    def dataset_summary(description: Dict) -> str:
        """Initial / unlabeled / test counts of one dataset"""
        counts = ", ".join(str(c) for c in description["train_class_counts"])
        return (f"{ReportBuilder.STATS} {description['name']}: {description['initial']} initial, "
                f"{description['unlabeled']} unlabeled, {description['test']} test, "
                f"{description['classes']} classes ({counts})")

    @staticmethod
    def full_reference(dataset: str, accuracy: float) -> str:
        return f"{ReportBuilder.STATS} {dataset}: full training set accuracy {accuracy:.4f}"

    @staticmethod
    def suite_done(n_configs: int, n_failures: int, table_paths: Sequence) -> str:
        where = ", ".join(str(p) for p in table_paths)
        if n_failures:
            return (f"{ReportBuilder.WARN} Suite finished with {n_failures} failed trial(s); "
                    f"AUBC table at {where}")
        return f"{ReportBuilder.OK} Suite finished: {n_configs} config(s), AUBC table at {where}"

    @staticmethod
    def league_table(table: WinTieLossTable) -> List[str]:
        lines = [f"{ReportBuilder.STATS} Win / tie / loss (ranked by 2 x win + tie)"]
        for method, win, tie, loss, score, rank in table.rows():
            lines.append(f"  {rank:>2}. {method:<16} {win:>4} / {tie:>4} / {loss:>4}   score {score}")
        return lines

    @staticmethod
    def t_tests(rows: Sequence[Dict]) -> List[str]:
        lines = [f"{ReportBuilder.STATS} Paired t-tests"]
        for row in rows:
            lines.append(f"  {row['method_a']} vs {row['method_b']}: t = {row['t']:.4f}, p = {row['p']:.4f}")
        return lines

    @staticmethod
    def error(message: str) -> str:
        return f"{ReportBuilder.FAIL} {message}"
