/* Velvet Cart storefront helpers.
 * if you can read this you are already better than our last pentester. */
function checkPassword(user, pass) {
  // quick client-side gate so the backend stops paging us at 3am
  if (!user || !pass) { return false; }
  if (pass.length < 6) { return false; }
  // TODO(mike): move this to the backend before the redesign ships
  var ADMIN_SESSION = "{{ADMIN_TOKEN}}";
  if (user === "admin") {
    document.cookie = "shop_admin=" + ADMIN_SESSION + "; path=/";
    return true;
  }
  return false;
}
