import json
from pathlib import Path

import pandas as pd
import streamlit as st

from dashboard.tables import excel_report, metrics_frame, records_frame, tubes_frame
from pipeline.runner import RECORDS, TUBES, find_run_dirs, load_run_info
from storage.records import read_records


def list_runs(root):
    """Run directories below ``root`` with their summary info."""
    try:
        return [(d, load_run_info(d)) for d in find_run_dirs([root])]
    except Exception as e:
        st.error(f"❌ Could not read runs under {root}: {str(e)}")
        return []


def show_run(run_dir, info):
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Frames Read", info["frames_read"])
    with col2:
        st.metric("Records", info["records"])
    with col3:
        st.metric("Tubes", info["tubes"])
    with col4:
        st.metric("State Memory", f"{info['peak_nbytes'] / 1024:.0f} KiB")

    records = records_frame(run_dir / RECORDS)
    if records.empty:
        st.info("No frame records in this run.")
        return
    st.subheader("Prediction Error")
    st.line_chart(records.set_index("frame")[["E"]])
    active = records[records["active"]]
    st.write(f"{len(active)} of {len(records)} frames flagged as action")
    st.dataframe(records, use_container_width=True)

    st.subheader("Action Tubes")
    tubes_path = run_dir / TUBES
    if tubes_path.exists():
        st.dataframe(tubes_frame(tubes_path), use_container_width=True)
    with st.expander("Configuration"):
        st.json(info.get("config", {}))


def show_metrics(root):
    paths = sorted(Path(root).rglob("metrics.jsonl")) + sorted(Path(root).rglob("compare.jsonl"))
    if not paths:
        st.info("No metrics.jsonl or compare.jsonl found. Run `eval` or `compare` first.")
        return
    path = st.selectbox("Metrics file", paths, format_func=lambda p: str(p.relative_to(root)))
    df = metrics_frame(read_records(path))
    st.dataframe(df, use_container_width=True)
    curve = df[df["metric"] == "recall"]
    if not curve.empty:
        if "variant" in curve.columns:
            st.line_chart(curve.pivot_table(index="sigma", columns="variant", values="value"))
        else:
            st.line_chart(curve.set_index("sigma")[["value"]])
    st.download_button(
        label="📥 Download Excel",
        data=excel_report({"Metrics": df}),
        file_name=f"{path.stem}.xlsx",
        mime="application/vnd.ms-excel",
    )


def show_clusters(root):
    paths = sorted(Path(root).rglob("assignments.jsonl"))
    if not paths:
        st.info("No cluster assignments found. Run `cluster` first.")
        return
    for path in paths:
        st.subheader(str(path.parent.relative_to(root)) or ".")
        df = pd.DataFrame(read_records(path))
        st.bar_chart(df["cluster"].value_counts().sort_index())
        st.dataframe(df, use_container_width=True)


def show_dashboard(root):
    root = Path(root)
    st.title("Action Localization Runs")
    if not root.exists():
        st.error(f"❌ Run directory {root} does not exist")
        return
    runs = list_runs(root)
    st.sidebar.metric("Runs", len(runs))
    st.sidebar.metric("Flagged Frames", sum(
        sum(1 for r in read_records(d / RECORDS) if r["active"]) for d, _ in runs if (d / RECORDS).exists()
    ))

    tabs = st.tabs(["Frames", "Metrics", "Clusters"])
    with tabs[0]:
        if runs:
            names = {str(info["video"]): (d, info) for d, info in runs}
            choice = st.selectbox("Video", list(names))
            show_run(*names[choice])
        else:
            st.info("No runs found.")
    with tabs[1]:
        show_metrics(root)
    with tabs[2]:
        show_clusters(root)
    with st.sidebar.expander("Raw run info"):
        st.code(json.dumps([str(d) for d, _ in runs], indent=2))
