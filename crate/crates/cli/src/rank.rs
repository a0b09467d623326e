use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use ctrlscore::report::{csv_field, fmt_f64, write_text, ScoreTable};
use ctrlscore::stats::{mean, quantile, rank_descending};
use ctrlscore::{Error, Result};

use crate::EXIT_OK;

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    /// Subjects × nodes score table as written by `batch`.
    #[arg(long)]
    pub table: PathBuf,
    /// Nodes in the top panel.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Nodes in the bottom panel.
    #[arg(long, default_value_t = 5)]
    pub bottom: usize,
    /// Box-plot CSV: panel,rank,node_id,label,mean,subject,score.
    #[arg(long)]
    pub out: PathBuf,
}

/// One node in the mean-score ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedNode {
    /// Position in the ordering, starting at 1.
    pub rank: usize,
    /// One-based column index in the table.
    pub node_id: usize,
    pub label: String,
    pub mean: f64,
}

/// Nodes by descending mean score across subjects; ties by ascending node id.
pub fn mean_ranking(table: &ScoreTable) -> Vec<RankedNode> {
    let means: Vec<f64> = (0..table.n_nodes()).map(|j| mean(&table.column(j))).collect();
    rank_descending(&means)
        .into_iter()
        .enumerate()
        .map(|(r, j)| RankedNode {
            rank: r + 1,
            node_id: j + 1,
            label: table.nodes[j].clone(),
            mean: means[j],
        })
        .collect()
}

pub fn ranking_csv(ranking: &[RankedNode]) -> String {
    let mut out = String::from("rank,node_id,label,mean\n");
    for r in ranking {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.rank,
            r.node_id,
            csv_field(&r.label),
            fmt_f64(r.mean)
        );
    }
    out
}

/// Per-node mean, median and quartiles, in node order.
pub fn node_summary_csv(table: &ScoreTable) -> String {
    let mut out = String::from("node_id,label,mean,median,q1,q3,min,max\n");
    for j in 0..table.n_nodes() {
        let col = table.column(j);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            j + 1,
            csv_field(&table.nodes[j]),
            fmt_f64(mean(&col)),
            fmt_f64(quantile(&col, 0.5)),
            fmt_f64(quantile(&col, 0.25)),
            fmt_f64(quantile(&col, 0.75)),
            fmt_f64(quantile(&col, 0.0)),
            fmt_f64(quantile(&col, 1.0)),
        );
    }
    out
}

/// Long-format box-plot data: one row per (panel, node, subject). The top
/// panel holds the first `top` nodes of the mean ranking and the bottom panel
/// the last `bottom`, both listed in ranking order.
pub fn panels_csv(table: &ScoreTable, top: usize, bottom: usize) -> Result<String> {
    let n = table.n_nodes();
    for (name, k) in [("top", top), ("bottom", bottom)] {
        if k > n {
            return Err(Error::InvalidParameter(format!(
                "--{name} {k} exceeds the number of nodes ({n})"
            )));
        }
    }
    let ranking = mean_ranking(table);
    let mut out = String::from("panel,rank,node_id,label,mean,subject,score\n");
    let panels = [("top", &ranking[..top]), ("bottom", &ranking[n - bottom..])];
    for (panel, nodes) in panels {
        for r in nodes {
            for (s, row) in table.subjects.iter().zip(&table.values) {
                let _ = writeln!(
                    out,
                    "{panel},{},{},{},{},{},{}",
                    r.rank,
                    r.node_id,
                    csv_field(&r.label),
                    fmt_f64(r.mean),
                    csv_field(s),
                    fmt_f64(row[r.node_id - 1])
                );
            }
        }
    }
    Ok(out)
}

pub fn run(args: &RankArgs) -> Result<i32> {
    let table = ScoreTable::read(&args.table)?;
    let text = panels_csv(&table, args.top, args.bottom)?;
    write_text(&args.out, &text)?;
    let ranking = mean_ranking(&table);
    let ids = |nodes: &[RankedNode]| {
        nodes
            .iter()
            .map(|r| r.node_id.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    println!("top {}: {}", args.top, ids(&ranking[..args.top]));
    println!(
        "bottom {}: {}",
        args.bottom,
        ids(&ranking[ranking.len() - args.bottom..])
    );
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: Vec<Vec<f64>>) -> ScoreTable {
        let n = values[0].len();
        ScoreTable {
            subjects: (1..=values.len()).map(|i| format!("s{i}")).collect(),
            nodes: (1..=n).map(|i| i.to_string()).collect(),
            values,
        }
    }

    #[test]
    fn constant_table_ranks_by_index() {
        let t = table(vec![vec![0.25; 4], vec![0.25; 4]]);
        let ids: Vec<usize> = mean_ranking(&t).iter().map(|r| r.node_id).collect();
        assert_eq!(ids, [1, 2, 3, 4]);
    }

    #[test]
    fn ranking_uses_means() {
        let t = table(vec![vec![0.1, 0.6, 0.3], vec![0.3, 0.2, 0.5]]);
        let ids: Vec<usize> = mean_ranking(&t).iter().map(|r| r.node_id).collect();
        assert_eq!(ids, [2, 3, 1]);
    }

    #[test]
    fn k_above_n_is_an_error() {
        let t = table(vec![vec![0.5, 0.5]]);
        assert!(panels_csv(&t, 3, 1).is_err());
        assert!(panels_csv(&t, 1, 3).is_err());
    }

    #[test]
    fn k_equal_n_lists_every_node() {
        let t = table(vec![vec![0.2, 0.5, 0.3]]);
        let csv = panels_csv(&t, 3, 0).unwrap();
        let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
        assert_eq!(ids, ["2", "3", "1"]);
    }
}
