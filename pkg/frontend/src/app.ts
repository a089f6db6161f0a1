import { ApiClient } from './api.js';
import { ResultCard, SearchController } from './controller.js';
import { formatScore } from './format.js';
import { dragToRegion, regionToPixels } from './region.js';
import { ImageInfo, Region } from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  return node;
}

class RegionExplorer {
  private api = new ApiClient();
  private controller: SearchController;

  private gallery = document.getElementById('gallery') as HTMLDivElement;
  private queryPane = document.getElementById('query-pane') as HTMLDivElement;
  private queryImage = document.getElementById('query-image') as HTMLImageElement;
  private selectionBox = document.getElementById('selection-box') as HTMLDivElement;
  private results = document.getElementById('results') as HTMLDivElement;
  private banner = document.getElementById('error-banner') as HTMLDivElement;
  private clearButton = document.getElementById('clear-region') as HTMLButtonElement;
  private kInput = document.getElementById('k-input') as HTMLInputElement;
  private groupInput = document.getElementById('group-input') as HTMLInputElement;

  private dragStart: { x: number; y: number } | null = null;

  constructor() {
    this.controller = new SearchController(
      this.api,
      {
        onResults: (cards) => this.renderResults(cards),
        onError: (message) => this.showError(message),
        onStateChange: (state) => this.renderSelection(state.region),
      },
      formatScore,
    );
    this.wireEvents();
    void this.loadGallery();
  }

  private wireEvents(): void {
    this.queryImage.addEventListener('mousedown', (e) => {
      e.preventDefault();
      this.dragStart = this.toImageCoords(e);
    });
    window.addEventListener('mousemove', (e) => {
      if (this.dragStart === null) {
        return;
      }
      const region = this.currentDragRegion(e);
      this.renderSelection(region);
    });
    window.addEventListener('mouseup', (e) => {
      if (this.dragStart === null) {
        return;
      }
      const region = this.currentDragRegion(e);
      this.dragStart = null;
      if (region !== null) {
        void this.controller.setRegion(region);
      }
    });
    this.clearButton.addEventListener('click', () => {
      void this.controller.setRegion(null);
    });
    this.kInput.addEventListener('change', () => {
      const k = parseInt(this.kInput.value, 10);
      if (Number.isFinite(k) && k >= 1) {
        void this.controller.setK(k);
      }
    });
    this.groupInput.addEventListener('change', () => {
      const n = parseInt(this.groupInput.value, 10);
      void this.controller.setGroupClasses(Number.isFinite(n) && n >= 1 ? n : null);
    });
    this.banner.addEventListener('click', () => this.banner.classList.add('hidden'));
  }

  private toImageCoords(e: MouseEvent): { x: number; y: number } {
    const rect = this.queryImage.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  private currentDragRegion(e: MouseEvent): Region | null {
    if (this.dragStart === null) {
      return null;
    }
    return dragToRegion(
      this.dragStart,
      this.toImageCoords(e),
      this.queryImage.clientWidth,
      this.queryImage.clientHeight,
    );
  }

  private async loadGallery(): Promise<void> {
    let images: ImageInfo[];
    try {
      images = await this.api.listImages();
    } catch (err) {
      this.showError((err as Error).message);
      return;
    }
    this.gallery.replaceChildren();
    for (const info of images) {
      const card = el('button', 'thumb');
      const img = el('img');
      img.src = info.thumbnail_url;
      img.alt = info.id;
      const label = el('span');
      label.textContent = `${info.id} (${info.class_label})`;
      card.append(img, label);
      card.addEventListener('click', () => this.selectQuery(info));
      this.gallery.append(card);
    }
  }

  private selectQuery(info: ImageInfo): void {
    this.queryPane.classList.remove('hidden');
    this.queryImage.src = this.api.imageUrl(info.id);
    void this.controller.setQuery(info.id);
  }

  private renderSelection(region: Region | null): void {
    if (region === null) {
      this.selectionBox.classList.add('hidden');
      return;
    }
    const box = regionToPixels(region, this.queryImage.clientWidth, this.queryImage.clientHeight);
    this.selectionBox.classList.remove('hidden');
    this.selectionBox.style.left = `${box.left}px`;
    this.selectionBox.style.top = `${box.top}px`;
    this.selectionBox.style.width = `${box.width}px`;
    this.selectionBox.style.height = `${box.height}px`;
  }

  private renderResults(cards: ResultCard[]): void {
    this.banner.classList.add('hidden');
    this.results.replaceChildren();
    for (const card of cards) {
      const node = el('div', 'result-card');
      const img = el('img');
      img.src = card.overlayUrl;
      img.alt = `${card.id} overlay`;
      img.addEventListener('click', () => {
        // clicking a result promotes it to the new query (region resets)
        this.queryImage.src = this.api.imageUrl(card.id);
        void this.controller.setQuery(card.id);
      });
      const caption = el('div', 'caption');
      caption.textContent = `#${card.rank} ${card.id} · ${card.classLabel} · ${card.scoreText}`;
      node.append(img, caption);
      this.results.append(node);
    }
  }

  private showError(message: string): void {
    this.banner.textContent = `${message} (click to dismiss)`;
    this.banner.classList.remove('hidden');
  }
}

new RegionExplorer();
