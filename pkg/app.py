# app.py
import pandas as pd
import streamlit as st
from dotenv import load_dotenv

from models.schemas import KMeansConfig, parse_list
from services.clustering import kmeans
from services.embedding import spectral_embedding
from services.errors import SpecregError
from services.experiments import run_toy
from services.generators import clique_block_model, sbm
from services.metrics import evaluate_all
from services.reporting import theory_report

load_dotenv()

# ------------------------
# App chrome
# ------------------------
st.set_page_config(page_title="specreg explorer", page_icon="🕸️", layout="wide")

PAGES = ["Toy", "Theory", "Embed"]


def set_route(page: str):
    """Store the page in the URL so reloads land on it."""
    if st.query_params.get("page") != page:
        st.query_params["page"] = page
        st.rerun()


requested = st.query_params.get("page", PAGES[0])

with st.sidebar:
    st.markdown("### specreg")
    st.caption("Regularized spectral embedding")
    page = st.radio("Page", PAGES, index=PAGES.index(requested) if requested in PAGES else 0, key="nav_radio")
    if page != requested: set_route(page)

current_page = page


def _sizes(text: str, cast=int):
    try:
        return parse_list(text, cast)
    except ValueError:
        st.error(f"Could not read sizes: {text!r}")
        st.stop()


# ------------------------
# Pages
# ------------------------
def render_toy():
    st.subheader("Three cliques of sizes 5, 3, 2")
    st.caption("Embedding in dimension 1 with and without regularization.")
    st.code(run_toy(), language="text")


def render_theory():
    st.subheader("Thresholds and predicted sign splits")
    bipartite = st.checkbox("Bipartite block model")
    sizes = _sizes(st.text_input("Block sizes", "40,30,20,10"), float)
    m_sizes = _sizes(st.text_input("Right-part sizes", "35,25,15,5"), float) if bipartite else None
    alpha = st.number_input("alpha (absolute)", min_value=1e-6, value=1.0, format="%.6f")
    try:
        st.code(theory_report(sizes, alpha, m_sizes), language="text")
    except SpecregError as e:
        st.error(str(e))


def render_embed():
    st.subheader("Embed, cluster, score")
    model = st.selectbox("Graph", ["cliques", "sbm"])
    sizes = _sizes(st.text_input("Block sizes", "5,3,2" if model == "cliques" else "20*10"))
    col1, col2, col3 = st.columns(3)
    alpha = col1.number_input("alpha_rel", min_value=0.0, value=1.0)
    dim = col2.number_input("dimension", min_value=1, value=max(1, len(sizes) - 1), step=1)
    seed = col3.number_input("seed", min_value=0, value=0, step=1)
    if model == "sbm":
        p_in = st.number_input("p_in", min_value=0.0, max_value=1.0, value=0.5)
        p_out = st.number_input("p_out", min_value=0.0, max_value=1.0, value=0.01)

    if not st.button("Run ▶"):
        return
    try:
        if model == "cliques":
            g, truth = clique_block_model(sizes)
        else:
            g, truth = sbm(sizes, [p_in] * len(sizes), p_out, seed=int(seed))
        emb = spectral_embedding(g, int(dim), alpha, "relative", seed=int(seed), allow_isolated=True)
        pred, inertia = kmeans(emb.coordinates, KMeansConfig(K=truth.K, seed=int(seed)))
        record = evaluate_all(g, pred, truth)
    except (SpecregError, ValueError) as e:
        st.error(str(e))
        return

    st.caption(f"absolute alpha {emb.alpha_absolute:.4g} · k-means inertia {inertia:.4g}")
    st.dataframe(pd.DataFrame([record.model_dump()]), use_container_width=True)
    df = pd.DataFrame(emb.coordinates, columns=[f"x{emb.first_index + c}" for c in range(emb.dim)])
    df.insert(0, "truth", truth.assignments)
    df.insert(1, "cluster", pred.assignments)
    st.dataframe(df.head(200), use_container_width=True)
    st.download_button("Download embedding CSV", data=df.to_csv(index=False).encode("utf-8"),
                       file_name=f"embedding_{model}.csv", mime="text/csv")


# ------------------------
# Router
# ------------------------
if   current_page == "Toy":     render_toy()
elif current_page == "Theory":  render_theory()
else:                           render_embed()
