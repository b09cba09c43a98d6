import { ApiClient } from './api';
import { StudioApp } from './app';

const app = new StudioApp(new ApiClient());
app
  .start()
  .then(() => app.loadGallery())
  .catch((err) => {
    const status = document.getElementById('status');
    if (status) status.textContent = `failed to start: ${err}`;
  });
