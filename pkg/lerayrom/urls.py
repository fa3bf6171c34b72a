"""URL configuration: the admin is the only web surface, for browsing stage records."""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path("admin/", admin.site.urls),
]
