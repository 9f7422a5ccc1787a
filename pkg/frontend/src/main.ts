// Console entry point. This is the only module that touches the DOM: it maps
// hash routes onto panels, forwards button clicks to API calls, and re-renders
// from whatever documents the engine returns.

import { ApiError, ConsoleApi } from "./api.js";
import { pollConsultation } from "./polling.js";
import {
  renderCaseEditor,
  renderEmptyConsole,
  renderFaqPicker,
  renderGapTable,
  renderJobStatus,
  renderNavigator,
  renderProblem,
  renderRiskPanel,
  renderSpecialistPicker,
  renderSpecialistResult,
  renderSynthesisPanel,
  renderTeamBoard,
  teamCards,
} from "./render.js";
import { ConsoleSession } from "./session.js";
import type {
  AgentsDoc,
  PatientCaseDoc,
  ProblemDocument,
  TemplateEntry,
  TranscriptDoc,
} from "./types.js";

const SAMPLE_CASE = {
  schema_version: 1,
  case_id: "console-demo",
  demographics: { age: 58, sex: "male" },
  chief_complaint: "fever and malaise",
  history: "Two days of fever and rigors.",
  vitals: [
    {
      timestamp: "2026-03-01T12:00:00Z",
      respiration_rate: 22,
      spo2: 94,
      on_supplemental_oxygen: false,
      spo2_scale: "scale1",
      systolic_bp: 104,
      heart_rate: 112,
      consciousness: "alert",
      temperature: 38.9,
    },
  ],
  labs: [{ name: "lactate", value: 3.2, unit: "mmol/L", timestamp: "2026-03-01T12:30:00Z" }],
  medications: [],
  sdoh: { housing: "stable", substance_use: "none", insurance: "private" },
};

// Same-origin by default; ?api=<base> overrides for proxied setups. The
// engine sends no CORS headers, so a cross-origin base needs a proxy in front.
const api = new ConsoleApi(new URLSearchParams(location.search).get("api") ?? "");
const session = new ConsoleSession();

let templates: TemplateEntry[] = [];
let agents: AgentsDoc | null = null;
let editorJson = JSON.stringify(SAMPLE_CASE, null, 2);
let editorProblem: ProblemDocument | null = null;

function root(): HTMLElement {
  const el = document.getElementById("app");
  if (!el) throw new Error("missing #app mount point");
  return el;
}

function problemOf(error: unknown): ProblemDocument {
  if (error instanceof ApiError) return error.problem;
  return { code: "client_error", message: String(error), detail: null };
}

async function ensureCatalog(): Promise<void> {
  if (templates.length === 0) templates = (await api.listTemplates()).templates;
  if (!agents) agents = await api.listAgents();
}

function selectedQuestion(): { template_id?: string; question?: string } {
  const picked = document.querySelector<HTMLInputElement>("input[name=faq]:checked");
  if (picked && picked.value) return { template_id: picked.value };
  const free = document.querySelector<HTMLTextAreaElement>("#free-question");
  return { question: free?.value ?? "" };
}

async function showHome(): Promise<void> {
  root().innerHTML =
    renderCaseEditor({ json: editorJson, problem: editorProblem }) + renderEmptyConsole();
}

async function showCase(caseId: string): Promise<void> {
  session.openCase(caseId);
  await ensureCatalog();
  let risk = "";
  try {
    const [latest, series, alerts] = await Promise.all([
      api.evaluateRisk(caseId),
      api.riskSeries(caseId),
      api.riskAlerts(caseId),
    ]);
    risk = renderRiskPanel(latest, series.series, alerts.alerts);
  } catch (error) {
    risk = renderRiskPanel(null, [], []) + renderProblem(problemOf(error));
  }
  const roster = agents ? agents.consult : [];
  const jobs = session
    .transcripts()
    .map((ref) => renderJobStatus(ref.transcriptId, ref.mode))
    .join("");
  root().innerHTML =
    `<p class="case-banner">Case <code>${caseId}</code></p>` +
    renderFaqPicker(templates, templates[0]?.id ?? null) +
    risk +
    renderSpecialistPicker(roster) +
    `<div id="jobs">${jobs}</div><div id="consult-result"></div>`;
}

async function showTranscript(transcriptId: string): Promise<void> {
  await ensureCatalog();
  try {
    const job = await api.getConsultation(transcriptId);
    if (!job.transcript) {
      root().innerHTML = renderJobStatus(transcriptId, job.status);
      return;
    }
    renderTranscript(job.transcript);
  } catch (error) {
    root().innerHTML = renderProblem(problemOf(error));
  }
}

function renderTranscript(transcript: TranscriptDoc): void {
  const core = agents ? agents.core : [];
  const parts = [
    `<p class="case-banner">Case <code>${transcript.case_id}</code>, consultation <code>${transcript.transcript_id}</code> (${transcript.mode})</p>`,
    renderTeamBoard(teamCards(core, transcript.responses)),
    renderSynthesisPanel(transcript),
  ];
  if (transcript.gap_report) parts.push(renderGapTable(transcript.gap_report));
  root().innerHTML = parts.join("");
}

async function submitCase(): Promise<void> {
  const textarea = document.querySelector<HTMLTextAreaElement>("#case-json");
  if (textarea) editorJson = textarea.value;
  let doc: unknown;
  try {
    doc = JSON.parse(editorJson);
  } catch (error) {
    editorProblem = { code: "invalid_json", message: String(error), detail: null };
    await showHome();
    return;
  }
  try {
    const saved = await api.createCase(doc as PatientCaseDoc);
    editorProblem = null;
    location.hash = `#/case/${encodeURIComponent(saved.case_id)}`;
  } catch (error) {
    editorProblem = problemOf(error);
    await showHome();
  }
}

async function startConsultation(): Promise<void> {
  const caseId = session.caseId;
  if (!caseId) return;
  try {
    const started = await api.startConsultation({ case_id: caseId, ...selectedQuestion() });
    session.addTranscript({
      transcriptId: started.transcript_id,
      mode: "team_assessment",
      parentTranscriptId: null,
    });
    const jobs = document.getElementById("jobs");
    if (jobs) jobs.innerHTML += renderJobStatus(started.transcript_id, started.status);
    const handle = pollConsultation(
      (id) => api.getConsultation(id),
      started.transcript_id,
      (job) => {
        const row = document.querySelector(
          `[data-transcript="${started.transcript_id}"] .status`,
        );
        if (row) row.textContent = job.status;
      },
    );
    session.trackPoller(started.transcript_id, handle);
    const outcome = await handle.done;
    session.releasePoller(started.transcript_id);
    if (outcome.kind === "terminal" && outcome.job.transcript) {
      renderTranscript(outcome.job.transcript);
    } else if (outcome.kind === "terminal" && outcome.job.error) {
      root().insertAdjacentHTML("beforeend", renderProblem(outcome.job.error));
    }
  } catch (error) {
    root().insertAdjacentHTML("beforeend", renderProblem(problemOf(error)));
  }
}

async function runSpecialistConsult(): Promise<void> {
  const caseId = session.caseId;
  if (!caseId) return;
  const specialty = document.querySelector<HTMLSelectElement>("#specialty")?.value ?? "";
  const question = document.querySelector<HTMLTextAreaElement>("#consult-question")?.value ?? "";
  const target = document.getElementById("consult-result");
  if (!target) return;
  try {
    const transcript = await api.specialistConsult({ case_id: caseId, specialty, question });
    target.innerHTML = renderSpecialistResult(transcript);
  } catch (error) {
    target.innerHTML = renderProblem(problemOf(error));
  }
}

async function showNavigator(caseId: string, transcriptId: string): Promise<void> {
  try {
    const explained = await api.navigatorExplain(caseId, transcriptId);
    root().insertAdjacentHTML("beforeend", renderNavigator(explained.text));
  } catch (error) {
    root().insertAdjacentHTML("beforeend", renderProblem(problemOf(error)));
  }
}

async function route(): Promise<void> {
  const hash = location.hash || "#/";
  try {
    const caseMatch = /^#\/case\/(.+)$/.exec(hash);
    if (caseMatch && caseMatch[1]) {
      await showCase(decodeURIComponent(caseMatch[1]));
      return;
    }
    const transcriptMatch = /^#\/transcript\/(.+)$/.exec(hash);
    if (transcriptMatch && transcriptMatch[1]) {
      await showTranscript(decodeURIComponent(transcriptMatch[1]));
      return;
    }
    await showHome();
  } catch (error) {
    root().innerHTML = renderProblem(problemOf(error), "reload");
  }
}

function onClick(event: Event): void {
  const target = event.target;
  if (!(target instanceof HTMLElement)) return;
  const action = target.dataset["action"];
  if (!action) return;
  if (action === "submit-case") void submitCase();
  else if (action === "load-sample") {
    editorJson = JSON.stringify(SAMPLE_CASE, null, 2);
    editorProblem = null;
    void showHome();
  } else if (action === "start-consultation") void startConsultation();
  else if (action === "run-consult") void runSpecialistConsult();
  else if (action === "reload") void route();
}

window.addEventListener("hashchange", () => void route());
document.addEventListener("click", onClick);
void route();

export { showNavigator };
