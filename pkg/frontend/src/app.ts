import { ApiClient } from './api.js';
import { TriageModel } from './triage.js';
import { ReviewModel } from './review.js';
import { renderReview, renderTriage } from './render.js';

const SERVICE_URL =
  new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8787';

const api = new ApiClient(SERVICE_URL);
const triage = new TriageModel(api);
const review = new ReviewModel(api, localStorage.getItem('reviewer') ?? 'analyst');

const el = (id: string) => document.getElementById(id)!;

function paint(): void {
  el('results').innerHTML = renderTriage(triage);
  el('review').innerHTML = renderReview(review);
  (el('rho-value') as HTMLElement).textContent = String(triage.rho);
  (el('k-value') as HTMLElement).textContent = String(triage.k);
}

async function runQuery(): Promise<void> {
  const raw = (el('query') as HTMLInputElement).value.trim();
  if (!raw) return;
  // an ID-shaped query asks the service about a stored entry
  const idLike = /^(T\d{4}(\.\d{3})?|TA\d{4}|CAPEC-\d+|CWE-\d+|CVE-\d{4}-\d{4,7}|NEWS-\w+)$/i;
  await triage.explore(idLike.test(raw) ? { entryId: raw } : { text: raw });
  paint();
}

function bindExplore(): void {
  el('run').addEventListener('click', () => void runQuery());
  (el('query') as HTMLInputElement).addEventListener('keydown', (event) => {
    if (event.key === 'Enter') void runQuery();
  });
  const rho = el('rho') as HTMLInputElement;
  rho.addEventListener('input', () => {
    (el('rho-value') as HTMLElement).textContent = rho.value;
  });
  rho.addEventListener('change', async () => {
    await triage.setRho(Number(rho.value));
    paint();
  });
  const k = el('k') as HTMLInputElement;
  k.addEventListener('change', async () => {
    await triage.setK(Number(k.value));
    paint();
  });
  el('results').addEventListener('click', async (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === 'retry') {
      await triage.retry();
      paint();
    }
  });
}

async function act(action: string): Promise<void> {
  if (action === 'accept') await review.submit('linked');
  else if (action === 'reject') await review.submit('not-linked');
  else if (action === 'skip') review.skip();
  paint();
}

function bindReview(): void {
  el('load-queue').addEventListener('click', async () => {
    review.reviewer = (el('reviewer') as HTMLInputElement).value || 'analyst';
    localStorage.setItem('reviewer', review.reviewer);
    await review.loadQueue((el('queue-attack') as HTMLInputElement).value || undefined);
    paint();
  });
  el('review').addEventListener('click', (event) => {
    const action = (event.target as HTMLElement).dataset.action;
    if (action) void act(action);
  });
  document.addEventListener('keydown', (event) => {
    if ((event.target as HTMLElement).tagName === 'INPUT') return;
    if (event.key === 'a') void act('accept');
    if (event.key === 'r') void act('reject');
    if (event.key === 's') void act('skip');
  });
}

bindExplore();
bindReview();
paint();
