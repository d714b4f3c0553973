import os

import streamlit as st
from dotenv import load_dotenv

import dashboard.run_viewer as run_viewer
from settings.config import RUN_DIR_ENV, RunSection

# Set page config
st.set_page_config(
    page_title="Action Localization Runs",
    page_icon="🎯",
    layout="wide"
)

# Load environment variables
load_dotenv()


def main():
    if "run_dir" not in st.session_state:
        st.session_state.run_dir = os.getenv(RUN_DIR_ENV) or RunSection().output

    st.session_state.run_dir = st.sidebar.text_input("Run directory", st.session_state.run_dir)
    run_viewer.show_dashboard(st.session_state.run_dir)


if __name__ == "__main__":
    main()
